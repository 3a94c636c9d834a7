#include "spmine/llmclient.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "spmine/error.hpp"
#include "spmine/hash.hpp"
#include "spmine/text.hpp"

namespace spmine {

using json = nlohmann::json;

ChatRequest make_chat_request(std::string model, const Prompt& prompt, double temperature) {
    ChatRequest r;
    r.model = std::move(model);
    r.messages = prompt.messages();
    r.temperature = temperature;
    return r;
}

void validate(const ChatRequest& request) {
    if (request.model.empty()) throw DataError("InvalidRequest", "model id is empty");
    if (request.messages.empty()) throw DataError("InvalidRequest", "request has no messages");
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        throw DataError("InvalidRequest", "temperature must be in [0, 2]");
    }
    if (!std::isfinite(request.frequency_penalty) || !std::isfinite(request.presence_penalty)) {
        throw DataError("InvalidRequest", "penalties must be finite");
    }
}

json to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", request.model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"frequency_penalty", request.frequency_penalty},
            {"presence_penalty", request.presence_penalty}};
}

std::string request_hash(std::string_view endpoint, const json& body) {
    // nlohmann::json keeps object keys sorted, so dump() is canonical.
    const json envelope = {{"endpoint", std::string(endpoint)}, {"body", json::parse(body.dump())}};
    return sha256_hex(envelope.dump());
}

// --- clocks --------------------------------------------------------------------------

Clock::duration SystemClock::now() {
    return std::chrono::duration_cast<duration>(std::chrono::steady_clock::now().time_since_epoch());
}

void SystemClock::sleep_for(duration d) {
    if (d.count() > 0) std::this_thread::sleep_for(d);
}

Clock::duration ManualClock::now() {
    std::lock_guard lock(mutex_);
    return duration(now_);
}

void ManualClock::sleep_for(duration d) {
    std::lock_guard lock(mutex_);
    sleeps_.push_back(d.count());
    if (d.count() > 0) now_ += d.count();
}

std::vector<double> ManualClock::sleeps() const {
    std::lock_guard lock(mutex_);
    return sleeps_;
}

// --- retries ---------------------------------------------------------------------------

double backoff_delay(const RetryPolicy& policy, int retry, double u) {
    const double nominal = policy.base_delay_s * std::pow(policy.factor, retry);
    const double jittered = std::min(nominal, policy.max_delay_s) * (1.0 + policy.jitter * (2.0 * u - 1.0));
    return std::clamp(jittered, 0.0, policy.max_delay_s);
}

bool is_retryable(int status) { return status == 0 || status == 429 || status >= 500; }

Mode parse_mode(std::string_view s) {
    const auto m = text::normalize(s);
    if (m == "live") return Mode::live;
    if (m == "record") return Mode::record;
    if (m == "replay") return Mode::replay;
    throw UsageError("mode must be live, record or replay (got '" + std::string(s) + "')");
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::live: return "live";
        case Mode::record: return "record";
        case Mode::replay: return "replay";
    }
    return "replay";
}

// --- cassette --------------------------------------------------------------------------

Cassette::Cassette(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw DataError("IoError", "cannot open cassette " + path_.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty()) continue;
        json entry;
        try {
            entry = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(row, std::string("cassette line is not JSON: ") + e.what());
        }
        if (!entry.contains("hash") || !entry.contains("response")) {
            throw MalformedRecord(row, "cassette line needs hash and response");
        }
        // A later recording of the same request wins.
        entries_[entry["hash"].get<std::string>()] = entry["response"].get<std::string>();
    }
}

std::optional<std::string> Cassette::find(const std::string& hash) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void Cassette::append(const std::string& hash, const json& request, const std::string& response) {
    std::lock_guard lock(mutex_);
    entries_[hash] = response;
    if (path_.empty()) return;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw DataError("IoError", "cannot append to cassette " + path_.string());
    nlohmann::ordered_json entry;
    entry["hash"] = hash;
    entry["request"] = request;
    entry["response"] = response;
    out << entry.dump() << '\n';
}

std::size_t Cassette::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

// --- client --------------------------------------------------------------------------

Client::Client(ClientOptions options, Transport* transport, Clock& clock)
    : options_(std::move(options)),
      transport_(transport),
      clock_(clock),
      cassette_(options_.mode == Mode::live ? std::filesystem::path{} : options_.cassette),
      jitter_rng_(options_.jitter_seed) {
    if (options_.mode != Mode::replay && transport_ == nullptr) {
        throw UsageError(std::string(to_string(options_.mode)) + " mode needs a provider transport");
    }
    if (options_.mode != Mode::live && options_.cassette.empty()) {
        throw UsageError(std::string(to_string(options_.mode)) + " mode needs a cassette path");
    }
    if (options_.retry.max_attempts < 1) throw UsageError("max_attempts must be at least 1");
}

std::string Client::call_transport(const std::string& endpoint, const std::string& payload) {
    const int attempts = options_.retry.max_attempts;
    HttpResult last;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        ++transport_calls_;
        last = transport_->post_json(endpoint, payload);
        if (last.status >= 200 && last.status < 300) return last.body;
        if (!is_retryable(last.status)) throw ProviderError(last.status, last.body);
        if (attempt == attempts) break;
        double u = 0.0;
        {
            std::lock_guard lock(rng_mutex_);
            u = jitter_rng_.uniform01();
        }
        const double delay = backoff_delay(options_.retry, attempt - 1, u);
        spdlog::debug("{} returned {}; retrying in {:.2f}s (attempt {}/{})", endpoint, last.status, delay, attempt,
                      attempts);
        clock_.sleep_for(Clock::duration(delay));
    }
    if (last.status == 429) throw RateLimited(attempts, last.body);
    throw ProviderError(last.status, last.body);
}

std::string Client::call(const std::string& endpoint, const json& body) {
    const auto hash = request_hash(endpoint, body);
    if (options_.mode != Mode::live) {
        if (auto hit = cassette_.find(hash)) return *hit;
        if (options_.mode == Mode::replay) throw CassetteMiss(hash);
    }
    auto response = call_transport(endpoint, body.dump());
    if (options_.mode == Mode::record) cassette_.append(hash, json{{"endpoint", endpoint}, {"body", body}}, response);
    return response;
}

std::string Client::complete(const ChatRequest& request) {
    validate(request);
    const auto raw = call("/chat/completions", to_json(request));
    try {
        const auto doc = json::parse(raw);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(200, "unexpected chat completion payload: " + std::string(e.what()));
    }
}

std::vector<std::vector<double>> Client::embed(const std::string& model, const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    const auto raw = call("/embeddings", json{{"model", model}, {"input", texts}});
    std::vector<std::vector<double>> out(texts.size());
    try {
        const auto doc = json::parse(raw);
        const auto& data = doc.at("data");
        if (data.size() != texts.size()) {
            throw DataError("DimensionMismatch", "embedding count does not match input count");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto idx = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
            if (idx >= out.size()) throw DataError("DimensionMismatch", "embedding index out of range");
            out[idx] = data[i].at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw ProviderError(200, "unexpected embeddings payload: " + std::string(e.what()));
    }
    return out;
}

std::vector<std::vector<double>> ClientEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    return client_.embed(model_, texts);
}

// --- rate limiting ------------------------------------------------------------------------

std::uint64_t estimate_tokens(const ChatRequest& request, double chars_per_token) {
    std::size_t chars = 0;
    for (const auto& m : request.messages) chars += m.content.size();
    return static_cast<std::uint64_t>(std::ceil(static_cast<double>(chars) / chars_per_token));
}

TokenBucket::TokenBucket(double tokens_per_minute, Clock& clock)
    : rate_per_s_(tokens_per_minute / 60.0), capacity_(tokens_per_minute), clock_(clock) {
    if (!(tokens_per_minute > 0.0)) throw UsageError("tokens_per_minute must be positive");
    tokens_ = capacity_;
    last_ = clock_.now().count();
}

void TokenBucket::refill() {
    const double now = clock_.now().count();
    tokens_ = std::min(capacity_, tokens_ + (now - last_) * rate_per_s_);
    last_ = now;
}

void TokenBucket::acquire(std::uint64_t tokens) {
    for (;;) {
        double wait = 0.0;
        {
            std::lock_guard lock(mutex_);
            refill();
            if (tokens_ > 0.0) {
                tokens_ -= static_cast<double>(tokens);
                return;
            }
            // Time until the balance turns positive again.
            wait = (-tokens_) / rate_per_s_ + 1e-3;
        }
        clock_.sleep_for(Clock::duration(wait));
    }
}

double TokenBucket::balance() {
    std::lock_guard lock(mutex_);
    refill();
    return tokens_;
}

void parallel_for(std::size_t n, std::size_t max_in_flight, const std::function<void(std::size_t)>& task) {
    if (n == 0) return;
    const auto workers = std::max<std::size_t>(1, std::min(max_in_flight, n));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < n; i = next++) task(i);
    };
    if (workers == 1) {
        worker();
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

std::vector<BatchResult> run_batch(Client& client, const std::vector<BatchItem>& items, const BatchOptions& options,
                                   Clock& clock) {
    if (options.max_in_flight == 0) throw UsageError("max_in_flight must be at least 1");
    TokenBucket bucket(options.tokens_per_minute, clock);
    std::vector<BatchResult> results(items.size());
    parallel_for(items.size(), options.max_in_flight, [&](std::size_t i) {
        auto& r = results[i];
        r.id = items[i].id;
        try {
            bucket.acquire(estimate_tokens(items[i].request, options.chars_per_token));
            r.text = client.complete(items[i].request);
        } catch (const Error& e) {
            r.error_kind = e.kind();
            r.error_message = e.what();
        } catch (const std::exception& e) {
            r.error_kind = "InternalError";
            r.error_message = e.what();
        }
    });
    return results;
}

// --- temperature sweep --------------------------------------------------------------------

std::vector<double> default_sweep_temperatures() { return {0.0, 0.2, 0.4, 0.6, 0.8}; }

SweepResult pick_temperature(std::vector<SweepPoint> points) {
    if (points.empty()) throw UsageError("temperature sweep needs at least one temperature");
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.temperature < b.temperature; });
    const SweepPoint* best = &points.front();
    for (const auto& p : points) {
        if (p.accuracy > best->accuracy) best = &p;
    }
    SweepResult out;
    out.best_temperature = best->temperature;
    out.points = std::move(points);
    return out;
}

SweepResult temperature_sweep(Client& client, const std::string& model, const std::vector<Prompt>& prompts,
                              const std::vector<bool>& gold, const std::vector<double>& temperatures,
                              const BatchOptions& options, Clock& clock) {
    if (prompts.size() != gold.size()) throw DataError("LengthMismatch", "prompts and gold labels differ in length");
    if (prompts.empty()) throw DataError("EmptyDataset", "temperature sweep needs validation items");
    std::vector<SweepPoint> points;
    for (const double t : temperatures) {
        std::vector<BatchItem> items;
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            items.push_back({std::to_string(i), make_chat_request(model, prompts[i], t)});
        }
        const auto results = run_batch(client, items, options, clock);
        SweepPoint point{t, 0.0, 0};
        std::size_t correct = 0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (!results[i].ok()) {
                if (results[i].error_kind == "CassetteMiss" || results[i].error_kind == "ProviderError" ||
                    results[i].error_kind == "RateLimited") {
                    throw ProviderError(0, "temperature " + std::to_string(t) + ": " + results[i].error_message);
                }
                ++point.anomalies;
                continue;
            }
            try {
                if (parse_crc_response(*results[i].text).concern == gold[i]) ++correct;
            } catch (const AnomalousResponse&) {
                ++point.anomalies;
            }
        }
        point.accuracy = static_cast<double>(correct) / static_cast<double>(prompts.size());
        points.push_back(point);
    }
    return pick_temperature(std::move(points));
}

// --- fine-tuning ----------------------------------------------------------------------------

void validate(const FineTuneJobSpec& spec) {
    if (spec.base_model.empty()) throw DataError("InvalidJobSpec", "base model is empty");
    if (spec.epochs < 1) throw DataError("InvalidJobSpec", "epochs must be at least 1");
    if (!(spec.lr_multiplier > 0.0)) throw DataError("InvalidJobSpec", "learning-rate multiplier must be positive");
    if (spec.training_file.empty()) throw DataError("InvalidJobSpec", "training file is not set");
}

json finetune_job_body(const FineTuneJobSpec& spec, const std::string& training_file_id,
                       const std::optional<std::string>& validation_file_id) {
    json body = {{"model", spec.base_model},
                 {"training_file", training_file_id},
                 {"hyperparameters", {{"n_epochs", spec.epochs}, {"learning_rate_multiplier", spec.lr_multiplier}}}};
    if (validation_file_id) body["validation_file"] = *validation_file_id;
    if (!spec.suffix.empty()) body["suffix"] = spec.suffix;
    return body;
}

std::string OpenAIFineTuneBackend::submit(const FineTuneJobSpec& spec) {
    validate(spec);
    auto upload = [&](const std::filesystem::path& file) {
        const auto r = transport_.post_file("/files", "fine-tune", file);
        if (r.status < 200 || r.status >= 300) throw ProviderError(r.status, r.body);
        return json::parse(r.body).at("id").get<std::string>();
    };
    const auto training_id = upload(spec.training_file);
    std::optional<std::string> validation_id;
    if (spec.validation_file) validation_id = upload(*spec.validation_file);
    const auto r = transport_.post_json("/fine_tuning/jobs", finetune_job_body(spec, training_id, validation_id).dump());
    if (r.status < 200 || r.status >= 300) throw ProviderError(r.status, r.body);
    return json::parse(r.body).at("id").get<std::string>();
}

}  // namespace spmine
