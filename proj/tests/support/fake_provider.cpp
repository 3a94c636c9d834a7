#include "fake_provider.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <utility>

#include "spmine/hash.hpp"
#include "spmine/text.hpp"

namespace spmine::testing {

using json = nlohmann::json;

namespace {

const std::vector<std::pair<std::string, std::string>>& crc_rules() {
    static const std::vector<std::pair<std::string, std::string>> rules = {
        {"phone number", "requirement of a phone number to use the app"},
        {"password", "password security"},
        {"hacked", "account hacked by a third party"},
        {"spy", "device spying on users"},
        {"my data", "sharing personal data with third parties"},
        {"location", "location tracking without consent"},
        {"listening", "device listening to private conversations"},
        {"privacy zone", "privacy zones not working"},
    };
    return rules;
}

const std::vector<std::pair<std::string, std::vector<std::string>>>& tm_rules() {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> rules = {
        {"phone number", {"data collection", "trust and transparency"}},
        {"password", {"authentication"}},
        {"hacked", {"data security and data theft", "security vulnerabilities"}},
        {"spying", {"surveillance"}},
        {"sharing", {"data sharing"}},
        {"location", {"location tracking", "consent"}},
        {"listening", {"surveillance", "privacy ethics"}},
        {"privacy zone", {"privacy controls"}},
    };
    return rules;
}

std::string between(const std::string& s, const std::string& start, const std::string& end) {
    const auto a = s.find(start);
    if (a == std::string::npos) return {};
    const auto from = a + start.size();
    const auto b = s.find(end, from);
    return s.substr(from, b == std::string::npos ? std::string::npos : b - from);
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

std::string chat_body(const std::string& content) {
    json j;
    j["object"] = "chat.completion";
    j["choices"] = json::array({json{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
    return j.dump();
}

std::string FakeProvider::crc_answer(const std::string& review_text) {
    const auto t = text::to_lower(review_text);
    if (t.find("weird") != std::string::npos) return "Sorry, I can't help with that.";
    std::vector<std::string> issues;
    for (const auto& [key, issue] : crc_rules()) {
        if (t.find(key) != std::string::npos) issues.push_back(issue);
    }
    if (issues.empty()) {
        return "Task 1: No\nTask 2: The text does not mention any security or privacy concerns.\nTask 3: N/A";
    }
    return "Task 1: Yes\nTask 2: The text raises security and privacy concerns because it mentions " +
           text::join(issues, " and ") + ".\nTask 3: " + text::join(issues, ", ");
}

std::string FakeProvider::tm_answer(const std::string& issue) {
    std::vector<std::string> themes;
    for (const auto& [key, mapped] : tm_rules()) {
        if (issue.find(key) != std::string::npos) themes.insert(themes.end(), mapped.begin(), mapped.end());
    }
    if (themes.empty()) themes.push_back("general comments related to security and privacy");
    return issue + " -> " + text::join(themes, ", ");
}

std::string FakeProvider::loss_answer(const std::string& review_text) {
    const auto t = text::to_lower(review_text);
    if (t.find("uninstall") != std::string::npos) return "1. Uninstalled";
    if (t.find("returned") != std::string::npos || t.find("replaced") != std::string::npos) return "2. Replaced";
    if (t.find("stopped using") != std::string::npos || t.find("no longer use") != std::string::npos) {
        return "3. Stopped Using";
    }
    return "4. None of them";
}

std::vector<double> FakeProvider::embedding(const std::string& input, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    for (const auto& tok : text::word_tokens(input)) {
        const auto h = sha256_hex(tok);
        const auto bucket = std::stoul(h.substr(0, 8), nullptr, 16) % dim;
        const double sign = (std::stoul(h.substr(8, 2), nullptr, 16) & 1) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        for (double& x : v) x = round6(x / std::sqrt(norm));
    }
    return v;
}

HttpResult FakeProvider::post_json(const std::string& endpoint, const std::string& body) {
    {
        std::lock_guard lock(mutex_);
        ++calls_;
    }
    const auto req = json::parse(body);
    if (endpoint == "/embeddings") {
        json out;
        out["object"] = "list";
        out["data"] = json::array();
        const auto& input = req.at("input");
        for (std::size_t i = 0; i < input.size(); ++i) {
            out["data"].push_back(json{{"index", i}, {"embedding", embedding(input[i].get<std::string>())}});
        }
        return {200, out.dump()};
    }
    if (endpoint != "/chat/completions") return {404, R"({"error":"unknown endpoint"})"};
    const auto system = req.at("messages").at(0).at("content").get<std::string>();
    const auto user = req.at("messages").at(1).at("content").get<std::string>();
    if (text::starts_with_icase(system, "You are a Large Language Model for classifying")) {
        return {200, chat_body(crc_answer(between(user, "Given the text T: ", "\nI want you to perform")))};
    }
    if (text::starts_with_icase(system, "You are a Large Language Model for mapping")) {
        return {200, chat_body(tm_answer(between(user, "a low-level theme related to security and privacy: ", "\n")))};
    }
    if (text::starts_with_icase(system, "You are a text classification assistant")) {
        return {200, chat_body(loss_answer(between(user, "Given the text T: ", "\n")))};
    }
    return {400, R"({"error":"unrecognized prompt"})"};
}

std::size_t FakeProvider::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

HttpResult ScriptedTransport::post_json(const std::string& endpoint, const std::string&) {
    std::lock_guard lock(mutex_);
    endpoints_.push_back(endpoint);
    if (script_.empty()) return {0, ""};
    auto r = script_.front();
    if (script_.size() > 1) script_.pop_front();
    return r;
}

std::vector<std::string> ScriptedTransport::endpoints() const {
    std::lock_guard lock(mutex_);
    return endpoints_;
}

std::size_t ScriptedTransport::calls() const {
    std::lock_guard lock(mutex_);
    return endpoints_.size();
}

}  // namespace spmine::testing
