#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "khess/linalg.hpp"

namespace khess {

// Status codes shared by the C API and the CLI exit path.
enum class Status : int {
    ok = 0,
    argument = 1,
    config = 2,
    nonconvergence = 3,
    invariant = 4,
    cone = 5,
    domain = 6,
    io = 7,
    capability = 8,
    out_of_image = 9,
};

class Error : public std::runtime_error {
public:
    Error(Status s, const std::string& msg) : std::runtime_error(msg), status_(s) {}
    Status status() const { return status_; }

private:
    Status status_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& m) : Error(Status::argument, m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(Status::config, m) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error(Status::domain, m) {}
};

struct CapabilityError : Error {
    explicit CapabilityError(const std::string& m) : Error(Status::capability, m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error(Status::io, m) {}
};

struct InvariantViolation : Error {
    explicit InvariantViolation(const std::string& m) : Error(Status::invariant, m) {}
};

// Eigenvalues left the positive cone. The offending spectrum travels with it.
struct ConeViolation : Error {
    ConeViolation(const std::string& m, Vec lam) : Error(Status::cone, m), lambda(std::move(lam)) {}
    Vec lambda;
};

struct OutOfImage : Error {
    OutOfImage(const std::string& m, Vec target) : Error(Status::out_of_image, m), y(std::move(target)) {}
    Vec y;
};

struct BoundaryMismatch : DomainError {
    BoundaryMismatch(const std::string& m, double d) : DomainError(m), defect(d) {}
    double defect;
};

struct LevelRecord {
    double eps = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

struct NonConvergence : Error {
    NonConvergence(const std::string& m, std::vector<LevelRecord> h)
        : Error(Status::nonconvergence, m), history(std::move(h)) {}
    std::vector<LevelRecord> history;
};

struct StallError : NonConvergence {
    StallError(const std::string& m, std::vector<LevelRecord> h) : NonConvergence(m, std::move(h)) {}
};

}  // namespace khess
