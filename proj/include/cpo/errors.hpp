#pragma once

#include <stdexcept>
#include <string>

namespace cpo {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct EnumerationTooLarge : Error {
    explicit EnumerationTooLarge(const std::string& msg) : Error(msg) {}
};

struct EmptyCorpus : Error {
    explicit EmptyCorpus(const std::string& msg) : Error(msg) {}
};

struct SingularDesign : Error {
    explicit SingularDesign(const std::string& msg) : Error(msg) {}
};

// Overlap violation: the randomization density is zero on an observed text.
struct ZeroSupport : Error {
    explicit ZeroSupport(const std::string& msg) : Error(msg) {}
};

struct NonFiniteWeight : Error {
    explicit NonFiniteWeight(const std::string& msg) : Error(msg) {}
};

struct AlreadyObservational : Error {
    explicit AlreadyObservational(const std::string& msg) : Error(msg) {}
};

struct MissingInput : Error {
    explicit MissingInput(const std::string& msg) : Error(msg) {}
};

struct MissingArtifact : Error {
    explicit MissingArtifact(const std::string& msg) : Error(msg) {}
};

struct DivergenceDetected : Error {
    explicit DivergenceDetected(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace cpo
