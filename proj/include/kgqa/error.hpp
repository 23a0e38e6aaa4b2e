#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kgqa {

enum class ErrorCode {
    parse,
    cycle,
    not_found,
    link_failure,
    format,
    unsupported_query,
    annotation_service,
    validation,
    training,
    model_state,
    frozen,
};

/// Machine-readable name used in service error payloads, e.g. "link-failure".
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorCode::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error(ErrorCode::format, message) {}
};

class CycleError : public Error {
public:
    explicit CycleError(const std::string& cycle)
        : Error(ErrorCode::cycle, "is_a cycle: " + cycle), cycle_(cycle) {}

    const std::string& cycle() const noexcept { return cycle_; }

private:
    std::string cycle_;
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& id)
        : Error(ErrorCode::not_found, "unknown entity: " + id), id_(id) {}

    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class LinkFailure : public Error {
public:
    explicit LinkFailure(const std::string& phrase)
        : Error(ErrorCode::link_failure, "cannot link phrase to an entity: " + phrase),
          phrase_(phrase) {}

    const std::string& phrase() const noexcept { return phrase_; }

private:
    std::string phrase_;
};

class UnsupportedQuery : public Error {
public:
    UnsupportedQuery(const std::string& reason, std::string chunks)
        : Error(ErrorCode::unsupported_query, reason + " (chunks: " + chunks + ")"),
          chunks_(std::move(chunks)) {}

    const std::string& chunks() const noexcept { return chunks_; }

private:
    std::string chunks_;
};

class AnnotationServiceError : public Error {
public:
    explicit AnnotationServiceError(const std::string& message)
        : Error(ErrorCode::annotation_service, message) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error(ErrorCode::validation, message) {}
};

} // namespace kgqa
