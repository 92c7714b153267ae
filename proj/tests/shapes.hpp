#pragma once

// Face cycles of reference polyhedra, counterclockwise viewed from outside.

#include <vector>

#include "polysub/complex.hpp"

namespace shapes {

using Cycles = std::vector<std::vector<polysub::VertexId>>;

inline Cycles cube() {
    return {{1, 4, 3, 2}, {5, 6, 7, 8}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 4, 8, 7}, {4, 1, 5, 8}};
}

inline Cycles tetrahedron() {
    return {{3, 1, 2}, {4, 1, 3}, {3, 2, 4}, {2, 1, 4}};
}

inline Cycles octahedron() {
    return {{1, 3, 5}, {3, 2, 5}, {2, 4, 5}, {4, 1, 5}, {3, 1, 6}, {2, 3, 6}, {4, 2, 6}, {1, 4, 6}};
}

inline Cycles dodecahedron() {
    return {{6, 2, 1, 4, 8},     {14, 8, 4, 10, 16},  {20, 18, 14, 16, 19}, {11, 5, 2, 6, 12},
            {18, 12, 6, 8, 14},  {16, 10, 9, 15, 19}, {13, 7, 5, 11, 17},   {19, 15, 13, 17, 20},
            {20, 17, 11, 12, 18}, {7, 3, 1, 2, 5},    {10, 4, 1, 3, 9},     {15, 9, 3, 7, 13}};
}

inline Cycles icosahedron() {
    return {{3, 10, 5}, {11, 9, 2}, {7, 9, 5},  {5, 10, 7}, {2, 9, 7},   {4, 2, 7},  {7, 10, 4},
            {12, 3, 6}, {12, 4, 10}, {12, 10, 3}, {9, 1, 5},  {3, 1, 6},   {5, 1, 3},  {11, 1, 9},
            {6, 1, 11}, {8, 2, 4},  {11, 2, 8}, {6, 11, 8}, {8, 4, 12},  {8, 12, 6}};
}

inline Cycles triangular_prism() {
    return {{2, 1, 3}, {6, 4, 5}, {4, 1, 2, 5}, {6, 3, 1, 4}, {5, 2, 3, 6}};
}

inline polysub::SphericalComplex make(const Cycles& c) {
    return polysub::SphericalComplex::build(c);
}

}  // namespace shapes
