#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tgraph {

// Every library failure derives from Error. category() is a short stable
// token that the CLI prints on its single-line error report.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error("parse", line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

// Violations of the tree shape of a thought graph.
class StructuralError : public Error {
public:
    explicit StructuralError(const std::string& what) : Error("structure", what) {}
};

class LookupError : public Error {
public:
    explicit LookupError(const std::string& what) : Error("lookup", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& what) : Error("transport", what) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& what) : Error("integrity", what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

// The model never produced a usable reply. raw_text is the last reply seen.
class GenerationError : public Error {
public:
    GenerationError(const std::string& what, std::string raw_text)
        : Error("generation", what), raw_text_(std::move(raw_text)) {}

    const std::string& raw_text() const noexcept { return raw_text_; }

private:
    std::string raw_text_;
};

// A transcript-backed client was asked something it has no recording for.
class UnscriptedRequest : public Error {
public:
    UnscriptedRequest(std::string tag, std::string digest)
        : Error("unscripted", "unscripted request: tag '" + tag + "', digest " + digest),
          tag_(std::move(tag)), digest_(std::move(digest)) {}

    const std::string& tag() const noexcept { return tag_; }
    const std::string& digest() const noexcept { return digest_; }

private:
    std::string tag_;
    std::string digest_;
};

} // namespace tgraph
