#pragma once

// Error taxonomy. Every failure the library raises derives from omnia::Error
// and carries an ErrorClass so the CLI can map it to a process exit code
// (config -> 1, data -> 2, endpoint -> 3).

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omnia {

enum class ErrorClass { Config = 1, Data = 2, Endpoint = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string msg)
        : std::runtime_error(std::move(msg)), class_(cls) {}

    ErrorClass error_class() const noexcept { return class_; }

private:
    ErrorClass class_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::string msg) : Error(ErrorClass::Config, std::move(msg)) {}
};

class MalformedLine : public Error {
public:
    MalformedLine(std::size_t line_number, std::string msg)
        : Error(ErrorClass::Data,
                "line " + std::to_string(line_number) + ": " + std::move(msg)),
          line_number_(line_number) {}

    std::size_t line_number() const noexcept { return line_number_; }

private:
    std::size_t line_number_;
};

class EmptyGraph : public Error {
public:
    EmptyGraph() : Error(ErrorClass::Data, "graph has no triples") {}
};

class DegenerateGraph : public Error {
public:
    explicit DegenerateGraph(std::string msg) : Error(ErrorClass::Data, std::move(msg)) {}
};

class IdOutOfRange : public Error {
public:
    explicit IdOutOfRange(std::string msg) : Error(ErrorClass::Data, std::move(msg)) {}
};

class CapExceeded : public Error {
public:
    CapExceeded(unsigned long long count, unsigned long long cap)
        : Error(ErrorClass::Data,
                "exhaustive candidate count " + std::to_string(count) +
                    " exceeds cap " + std::to_string(cap)),
          count_(count), cap_(cap) {}

    unsigned long long count() const noexcept { return count_; }
    unsigned long long cap() const noexcept { return cap_; }

private:
    unsigned long long count_;
    unsigned long long cap_;
};

class DegenerateValidation : public Error {
public:
    explicit DegenerateValidation(std::string msg) : Error(ErrorClass::Data, std::move(msg)) {}
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error(ErrorClass::Data, "retrieval corpus is empty") {}
};

class KOutOfRange : public Error {
public:
    KOutOfRange(std::size_t k, std::size_t corpus_size)
        : Error(ErrorClass::Data,
                "k = " + std::to_string(k) + " outside [1, " +
                    std::to_string(corpus_size) + "]") {}
};

class EndpointError : public Error {
public:
    explicit EndpointError(std::string msg) : Error(ErrorClass::Endpoint, std::move(msg)) {}
};

class EmptyResponse : public Error {
public:
    explicit EmptyResponse(std::string msg) : Error(ErrorClass::Endpoint, std::move(msg)) {}
};

class MissingContext : public Error {
public:
    explicit MissingContext(std::string msg) : Error(ErrorClass::Data, std::move(msg)) {}
};

class InsufficientPositives : public Error {
public:
    InsufficientPositives(std::size_t available, std::size_t required)
        : Error(ErrorClass::Data,
                "need " + std::to_string(required) + " positive candidates, have " +
                    std::to_string(available)),
          available_(available) {}

    std::size_t available() const noexcept { return available_; }

private:
    std::size_t available_;
};

class InsufficientNegatives : public Error {
public:
    InsufficientNegatives(std::size_t available, std::size_t required)
        : Error(ErrorClass::Data,
                "need " + std::to_string(required) + " negative candidates, have " +
                    std::to_string(available)),
          available_(available) {}

    std::size_t available() const noexcept { return available_; }

private:
    std::size_t available_;
};

class LengthMismatch : public Error {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : Error(ErrorClass::Data,
                "sequence lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class EmptyEvaluation : public Error {
public:
    EmptyEvaluation() : Error(ErrorClass::Data, "evaluation set is empty") {}
};

class MissingArtifact : public Error {
public:
    explicit MissingArtifact(const std::string& path)
        : Error(ErrorClass::Data, "required artifact missing: " + path) {}
};

}  // namespace omnia
