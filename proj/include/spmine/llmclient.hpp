#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spmine/chat.hpp"
#include "spmine/embedding.hpp"
#include "spmine/prompting.hpp"
#include "spmine/rng.hpp"

namespace spmine {

struct ChatRequest {
    std::string model;
    ChatMessages messages;
    double temperature = 0.0;
    double frequency_penalty = 2.0;
    double presence_penalty = 2.0;

    friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

ChatRequest make_chat_request(std::string model, const Prompt& prompt, double temperature = 0.0);

// Throws DataError("InvalidRequest"): empty model or messages, temperature outside [0, 2].
void validate(const ChatRequest& request);

// OpenAI-style /chat/completions body.
nlohmann::json to_json(const ChatRequest& request);

// SHA-256 of the compact, key-sorted JSON {"body": body, "endpoint": endpoint}.
// Independent of the order in which the body's keys were inserted.
std::string request_hash(std::string_view endpoint, const nlohmann::json& body);

// --- Transport and time ----------------------------------------------------------

struct HttpResult {
    int status = 0;  // 0: the request never got an HTTP response
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResult post_json(const std::string& endpoint, const std::string& body) = 0;
};

// HTTPS client for an OpenAI-compatible base URL such as https://api.openai.com/v1.
// The bearer token is read from the named environment variable at construction.
class HttpTransport final : public Transport {
public:
    HttpTransport(std::string base_url, const std::string& api_key_env, std::chrono::seconds timeout);
    ~HttpTransport() override;
    HttpResult post_json(const std::string& endpoint, const std::string& body) override;

    // Multipart upload used by the fine-tuning adapter.
    HttpResult post_file(const std::string& endpoint, const std::string& purpose, const std::filesystem::path& file);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class Clock {
public:
    using duration = std::chrono::duration<double>;
    virtual ~Clock() = default;
    virtual duration now() = 0;  // seconds since an arbitrary epoch
    virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
public:
    duration now() override;
    void sleep_for(duration d) override;
};

// Deterministic clock for tests: sleep_for advances time immediately.
class ManualClock final : public Clock {
public:
    duration now() override;
    void sleep_for(duration d) override;
    std::vector<double> sleeps() const;

private:
    mutable std::mutex mutex_;
    double now_ = 0.0;
    std::vector<double> sleeps_;
};

// --- Retries ----------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 5;
    double base_delay_s = 1.0;
    double factor = 2.0;
    double jitter = 0.2;  // +-20%
    double max_delay_s = 60.0;
};

// Delay before retry number `retry` (0-based), given a uniform draw u in [0, 1).
double backoff_delay(const RetryPolicy& policy, int retry, double u);

bool is_retryable(int status);

// --- Cassettes ------------------------------------------------------------------

enum class Mode { live, record, replay };

Mode parse_mode(std::string_view s);
std::string_view to_string(Mode mode);

// JSON lines of {hash, request, response}; the response is the raw body text.
// Appends are serialized and flushed one line at a time.
class Cassette {
public:
    Cassette() = default;
    explicit Cassette(std::filesystem::path path);

    std::optional<std::string> find(const std::string& hash) const;
    void append(const std::string& hash, const nlohmann::json& request, const std::string& response);
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
};

// --- Client -----------------------------------------------------------------------

struct ClientOptions {
    Mode mode = Mode::replay;
    std::filesystem::path cassette;
    RetryPolicy retry;
    std::uint64_t jitter_seed = 0;
};

// Provider-agnostic client. live: transport only; record: cassette first, misses go
// to the transport and are appended; replay: cassette only, misses throw CassetteMiss.
// Safe to call from several threads.
class Client {
public:
    Client(ClientOptions options, Transport* transport, Clock& clock);

    // Raw response body for a JSON POST. Retries 429, 5xx and transport failures;
    // other statuses throw ProviderError at once. Exhausted 429s throw RateLimited.
    std::string call(const std::string& endpoint, const nlohmann::json& body);

    // Assistant message text.
    std::string complete(const ChatRequest& request);

    std::vector<std::vector<double>> embed(const std::string& model, const std::vector<std::string>& texts);

    Mode mode() const noexcept { return options_.mode; }
    std::size_t transport_calls() const noexcept { return transport_calls_.load(); }
    const Cassette& cassette() const noexcept { return cassette_; }

private:
    std::string call_transport(const std::string& endpoint, const std::string& payload);

    ClientOptions options_;
    Transport* transport_;
    Clock& clock_;
    Cassette cassette_;
    std::mutex rng_mutex_;
    Rng jitter_rng_;
    std::atomic<std::size_t> transport_calls_{0};
};

// Embeddings through a Client (/embeddings endpoint).
class ClientEmbeddingProvider final : public EmbeddingProvider {
public:
    ClientEmbeddingProvider(Client& client, std::string model, std::string provider = "openai-compatible")
        : client_(client), model_(std::move(model)), provider_(std::move(provider)) {}
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override;
    std::string provider_id() const override { return provider_; }
    std::string model_id() const override { return model_; }

private:
    Client& client_;
    std::string model_;
    std::string provider_;
};

// --- Rate limiting and batches -----------------------------------------------------

// ceil(characters / chars_per_token) over all message contents.
std::uint64_t estimate_tokens(const ChatRequest& request, double chars_per_token = 4.0);

// Token bucket refilled continuously at tokens_per_minute. A request is admitted
// whenever the balance is positive, so the balance never drops below minus one
// request's cost.
class TokenBucket {
public:
    TokenBucket(double tokens_per_minute, Clock& clock);
    void acquire(std::uint64_t tokens);
    double balance();

private:
    void refill();

    double rate_per_s_;
    double capacity_;
    Clock& clock_;
    std::mutex mutex_;
    double tokens_;
    double last_;
};

struct BatchOptions {
    std::size_t max_in_flight = 4;
    double tokens_per_minute = 1'000'000;
    double chars_per_token = 4.0;
};

struct BatchResult {
    std::string id;
    std::optional<std::string> text;
    // Set when the request failed; the batch itself never throws.
    std::string error_kind;
    std::string error_message;

    bool ok() const noexcept { return text.has_value(); }
};

struct BatchItem {
    std::string id;
    ChatRequest request;
};

// Results come back in input order, one per item.
std::vector<BatchResult> run_batch(Client& client, const std::vector<BatchItem>& items, const BatchOptions& options,
                                   Clock& clock);

// Runs task(i) for i in [0, n) on up to `max_in_flight` threads.
void parallel_for(std::size_t n, std::size_t max_in_flight, const std::function<void(std::size_t)>& task);

// --- Temperature sweep -------------------------------------------------------------

struct SweepPoint {
    double temperature = 0.0;
    double accuracy = 0.0;
    std::size_t anomalies = 0;
};

struct SweepResult {
    double best_temperature = 0.0;
    std::vector<SweepPoint> points;
};

std::vector<double> default_sweep_temperatures();

// Highest accuracy wins; ties go to the lower temperature.
SweepResult pick_temperature(std::vector<SweepPoint> points);

// Classifies every prompt at each temperature and scores Task 1 against `gold`.
// Anomalous responses count as wrong.
SweepResult temperature_sweep(Client& client, const std::string& model, const std::vector<Prompt>& prompts,
                              const std::vector<bool>& gold, const std::vector<double>& temperatures,
                              const BatchOptions& options, Clock& clock);

// --- Fine-tuning ------------------------------------------------------------------

struct FineTuneJobSpec {
    std::string base_model = "gpt-3.5-turbo";
    std::filesystem::path training_file;
    std::optional<std::filesystem::path> validation_file;
    int epochs = 3;
    double lr_multiplier = 2.0;
    std::string suffix;
};

// Throws DataError("InvalidJobSpec").
void validate(const FineTuneJobSpec& spec);

// Body of POST /fine_tuning/jobs once files are uploaded.
nlohmann::json finetune_job_body(const FineTuneJobSpec& spec, const std::string& training_file_id,
                                 const std::optional<std::string>& validation_file_id);

class FineTuneBackend {
public:
    virtual ~FineTuneBackend() = default;
    // Returns the provider's job id.
    virtual std::string submit(const FineTuneJobSpec& spec) = 0;
};

class OpenAIFineTuneBackend final : public FineTuneBackend {
public:
    explicit OpenAIFineTuneBackend(HttpTransport& transport) : transport_(transport) {}
    std::string submit(const FineTuneJobSpec& spec) override;

private:
    HttpTransport& transport_;
};

}  // namespace spmine
