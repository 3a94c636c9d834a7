#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spmine {

// Exit-code family of an error, used by the CLI to pick 1/2/3.
enum class ErrorFamily { usage, data, provider };

class Error : public std::runtime_error {
public:
    Error(ErrorFamily family, std::string kind, const std::string& message)
        : std::runtime_error(message), family_(family), kind_(std::move(kind)) {}

    ErrorFamily family() const noexcept { return family_; }
    // Short machine-readable name, e.g. "MalformedRecord".
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorFamily family_;
    std::string kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorFamily::usage, "UsageError", message) {}
};

class DataError : public Error {
public:
    DataError(std::string kind, const std::string& message) : Error(ErrorFamily::data, std::move(kind), message) {}
};

class ProviderError : public Error {
public:
    ProviderError(int status, std::string body)
        : ProviderError("ProviderError", status, std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

protected:
    ProviderError(std::string kind, int status, std::string body)
        : Error(ErrorFamily::provider, std::move(kind),
                "provider returned status " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}

private:
    int status_;
    std::string body_;
};

class RateLimited : public ProviderError {
public:
    RateLimited(int attempts, std::string body)
        : ProviderError("RateLimited", 429, std::move(body)), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class CassetteMiss : public Error {
public:
    explicit CassetteMiss(const std::string& hash)
        : Error(ErrorFamily::provider, "CassetteMiss", "no recorded response for request " + hash), hash_(hash) {}
    const std::string& hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

class MalformedRecord : public DataError {
public:
    MalformedRecord(std::size_t row, const std::string& reason)
        : DataError("MalformedRecord", "row " + std::to_string(row) + ": " + reason), row_(row), reason_(reason) {}
    std::size_t row() const noexcept { return row_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t row_;
    std::string reason_;
};

class UnknownTheme : public DataError {
public:
    explicit UnknownTheme(const std::string& name)
        : DataError("UnknownTheme", "theme not in taxonomy: '" + name + "'"), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class WrongThemeCount : public DataError {
public:
    WrongThemeCount(std::size_t expected, std::size_t actual)
        : DataError("WrongCount", "expected " + std::to_string(expected) + " themes, found " + std::to_string(actual)),
          actual_(actual) {}
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t actual_;
};

// Raised when a model response cannot be parsed into the expected shape. The raw
// text is kept so callers can log and count anomalies.
class AnomalousResponse : public DataError {
public:
    AnomalousResponse(const std::string& reason, std::string raw)
        : DataError("AnomalousResponse", reason), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class UnclassifiedReview : public DataError {
public:
    explicit UnclassifiedReview(const std::string& review_id)
        : DataError("UnclassifiedReview", "no classification for review " + review_id), review_id_(review_id) {}
    const std::string& review_id() const noexcept { return review_id_; }

private:
    std::string review_id_;
};

}  // namespace spmine
