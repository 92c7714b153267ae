#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace polysub {

// All library failures are thrown as Error with a stable machine-readable
// name (e.g. "NonManifoldEdge", "CycleOverflow").  The CLI prints the name
// on stderr and exits 1.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& message)
        : std::runtime_error(name + ": " + message), name_(std::move(name)) {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

[[noreturn]] inline void fail(const std::string& name, const std::string& message) {
    throw Error(name, message);
}

}  // namespace polysub
