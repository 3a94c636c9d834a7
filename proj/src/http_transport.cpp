#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spmine/error.hpp"
#include "spmine/llmclient.hpp"

namespace spmine {

struct HttpTransport::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string prefix;  // path part of the base URL, e.g. "/v1"
    httplib::Headers headers;
};

HttpTransport::HttpTransport(std::string base_url, const std::string& api_key_env, std::chrono::seconds timeout)
    : impl_(std::make_unique<Impl>()) {
    const auto scheme_end = base_url.find("://");
    const auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    std::string host = base_url.substr(0, path_start);
    if (path_start != std::string::npos) impl_->prefix = base_url.substr(path_start);
    while (!impl_->prefix.empty() && impl_->prefix.back() == '/') impl_->prefix.pop_back();

    impl_->client = std::make_unique<httplib::Client>(host);
    if (!impl_->client->is_valid()) throw UsageError("invalid provider base URL '" + base_url + "'");
    impl_->client->set_connection_timeout(timeout);
    impl_->client->set_read_timeout(timeout);
    impl_->client->set_write_timeout(timeout);

    if (!api_key_env.empty()) {
        const char* key = std::getenv(api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw UsageError("environment variable " + api_key_env + " holding the API key is not set");
        }
        impl_->headers.emplace("Authorization", std::string("Bearer ") + key);
    }
}

HttpTransport::~HttpTransport() = default;

HttpResult HttpTransport::post_json(const std::string& endpoint, const std::string& body) {
    auto res = impl_->client->Post(impl_->prefix + endpoint, impl_->headers, body, "application/json");
    if (!res) return {0, "transport error: " + httplib::to_string(res.error())};
    return {res->status, res->body};
}

HttpResult HttpTransport::post_file(const std::string& endpoint, const std::string& purpose,
                                    const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("IoError", "cannot open " + file.string());
    std::ostringstream content;
    content << in.rdbuf();
    httplib::MultipartFormDataItems items = {
        {"purpose", purpose, "", ""},
        {"file", content.str(), file.filename().string(), "application/jsonl"},
    };
    auto res = impl_->client->Post(impl_->prefix + endpoint, impl_->headers, items);
    if (!res) return {0, "transport error: " + httplib::to_string(res.error())};
    return {res->status, res->body};
}

}  // namespace spmine
