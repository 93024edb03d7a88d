#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geonet {

// Malformed or inconsistent input data (CSV rows, snapshots, event logs).
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A numeric routine could not produce a usable result.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A node, origin or destination id that the current state does not know.
class unknown_id_error : public std::out_of_range {
public:
    unknown_id_error(const std::string& kind, const std::string& id)
        : std::out_of_range("unknown " + kind + " '" + id + "'"), kind_(kind), id_(id) {}

    const std::string& kind() const noexcept { return kind_; }
    const std::string& id() const noexcept { return id_; }

private:
    std::string kind_;
    std::string id_;
};

// Feedback addressed to a round that is not the current one for its destination.
class stale_round_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace geonet
