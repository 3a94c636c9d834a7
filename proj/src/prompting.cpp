#include "spmine/prompting.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <unordered_set>

#include "spmine/embedded.hpp"
#include "spmine/error.hpp"
#include "spmine/text.hpp"

namespace spmine {

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const auto name = tmpl.substr(open + 2, close - open - 2);
        const auto it = values.find(name);
        if (it == values.end()) throw std::invalid_argument("no value for placeholder {{" + std::string(name) + "}}");
        out.append(tmpl.substr(pos, open - pos));
        out.append(it->second);
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

std::string render_label(const Label& label) {
    std::string out = "Task 1: ";
    out += label.concern ? "Yes" : "No";
    out += "\nTask 2: ";
    out += label.rationale;
    out += "\nTask 3: ";
    out += label.concern ? text::join(label.issues, ", ") : "N/A";
    return out;
}

CrcPrompt render_crc_prompt(std::string_view review_text, const CrcExemplarPair& pair) {
    return {std::string(embedded::crc_system),
            fill_template(embedded::crc_user, {{"text", std::string(review_text)},
                                               {"example_a_text", pair.first_shown.text},
                                               {"example_a_response", render_label(pair.first_shown.label)},
                                               {"example_b_text", pair.second_shown.text},
                                               {"example_b_response", render_label(pair.second_shown.label)}})};
}

CrcPrompt render_crc_prompt(const Review& review, const CrcExemplarPair& pair) {
    return render_crc_prompt(review.text, pair);
}

CrcPrompt render_crc_prompt_zero_shot(std::string_view review_text) {
    return {std::string(embedded::crc_system),
            fill_template(embedded::crc_user_zero_shot, {{"text", std::string(review_text)}})};
}

TmPrompt render_tm_prompt(std::string_view issue, const ThemeSet& themes, const TmExemplarSet& exemplars) {
    std::vector<std::string> theme_lines;
    for (const auto& t : themes.themes()) theme_lines.push_back(t.name + ": " + t.definition);

    std::vector<std::string> example_blocks;
    for (std::size_t i = 0; i < exemplars.examples.size(); ++i) {
        const auto& ex = exemplars.examples[i];
        // A..Z, then AA, AB, ... for unusually large k.
        std::string letter;
        for (std::size_t n = i + 1; n > 0; n = (n - 1) / 26) letter.insert(letter.begin(), char('A' + (n - 1) % 26));
        example_blocks.push_back(fill_template(
            embedded::tm_example, {{"letter", letter}, {"issue", ex.mapping.issue}, {"response", render_mapping(ex.mapping)}}));
    }
    return {std::string(embedded::tm_system),
            fill_template(embedded::tm_user, {{"issue", std::string(issue)},
                                              {"themes", text::join(theme_lines, "\n")},
                                              {"examples", text::join(example_blocks, "\n")}})};
}

Prompt render_customer_loss_prompt(std::string_view review_text) {
    return {std::string(embedded::loss_system), fill_template(embedded::loss_user, {{"text", std::string(review_text)}})};
}

Prompt render_customer_loss_prompt(const Review& review) { return render_customer_loss_prompt(review.text); }

std::string_view to_string(LossAction action) {
    switch (action) {
        case LossAction::uninstalled: return "uninstalled";
        case LossAction::replaced: return "replaced";
        case LossAction::stopped_using: return "stopped_using";
        case LossAction::none: return "none";
    }
    return "none";
}

LossAction parse_customer_loss(std::string_view response) {
    const auto body = text::trim(response);
    if (body == "1. Uninstalled") return LossAction::uninstalled;
    if (body == "2. Replaced") return LossAction::replaced;
    if (body == "3. Stopped Using") return LossAction::stopped_using;
    if (body == "4. None of them") return LossAction::none;
    throw AnomalousResponse("customer-loss response is not one of the four allowed outputs", std::string(response));
}

std::string format_transcript(const Prompt& prompt) {
    return "------ System Prompt ------\n" + prompt.system + "\n------ User Prompt ------\n" + prompt.user + "\n";
}

FineTuneRecord make_record(const Prompt& prompt, std::string assistant) {
    return {{{"system", prompt.system}, {"user", prompt.user}, {"assistant", std::move(assistant)}}};
}

std::string validate_record(const FineTuneRecord& record) {
    static constexpr std::string_view roles[] = {"system", "user", "assistant"};
    if (record.messages.size() != 3) {
        return "expected 3 messages, found " + std::to_string(record.messages.size());
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (record.messages[i].role != roles[i]) {
            return "message " + std::to_string(i) + " has role '" + record.messages[i].role + "', expected '" +
                   std::string(roles[i]) + "'";
        }
        if (text::trim(record.messages[i].content).empty()) return std::string(roles[i]) + " message is empty";
    }
    return {};
}

std::string finetune_line(const FineTuneRecord& record) {
    nlohmann::ordered_json messages = nlohmann::ordered_json::array();
    for (const auto& m : record.messages) {
        nlohmann::ordered_json msg;
        msg["role"] = m.role;
        msg["content"] = m.content;
        messages.push_back(std::move(msg));
    }
    nlohmann::ordered_json line;
    line["messages"] = std::move(messages);
    return line.dump();
}

void export_finetune(const std::vector<FineTuneRecord>& records, const std::filesystem::path& path) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (auto problem = validate_record(records[i]); !problem.empty()) {
            throw DataError("InvalidRecord", "record " + std::to_string(i) + ": " + problem);
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("IoError", "cannot write " + path.string());
    for (const auto& r : records) out << finetune_line(r) << '\n';
    if (!out) throw DataError("IoError", "write failed for " + path.string());
}

namespace {

// Returns 1, 2 or 3 if `line` starts with "Task N:" (case-insensitive, optional
// spaces around N), 0 otherwise. `rest` receives the text after the colon.
int task_anchor(std::string_view line, std::string_view& rest) {
    auto s = line;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    if (!text::starts_with_icase(s, "task")) return 0;
    s.remove_prefix(4);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (s.empty() || s.front() < '1' || s.front() > '3') return 0;
    const int n = s.front() - '0';
    s.remove_prefix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (s.empty() || s.front() != ':') return 0;
    s.remove_prefix(1);
    rest = s;
    return n;
}

}  // namespace

CrcResponse parse_crc_response(std::string_view response) {
    const std::string raw(response);
    auto lines = text::split(response, '\n');
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
    }

    // sections[n] collects the lines belonging to Task n.
    std::vector<std::string> sections[4];
    int current = 0;
    int seen = 0;
    for (const auto& line : lines) {
        std::string_view rest;
        const int n = task_anchor(line, rest);
        if (n != 0) {
            if (n != seen + 1) {
                throw AnomalousResponse(n <= seen ? "Task " + std::to_string(n) + " appears twice"
                                                  : "Task " + std::to_string(n) + " appears before Task " +
                                                        std::to_string(seen + 1),
                                        raw);
            }
            seen = current = n;
            sections[n].emplace_back(rest);
        } else if (current != 0) {
            sections[current].push_back(line);
        }
    }
    if (seen != 3) throw AnomalousResponse("missing Task " + std::to_string(seen + 1) + " line", raw);

    auto answer = text::to_lower(text::trim(text::join(sections[1], " ")));
    if (!answer.empty() && answer.back() == '.') answer.pop_back();
    bool concern = false;
    if (answer == "yes") {
        concern = true;
    } else if (answer != "no") {
        throw AnomalousResponse("Task 1 is not Yes or No: '" + answer + "'", raw);
    }

    std::string rationale(text::trim(text::join(sections[2], "\n")));
    if (rationale.empty()) throw AnomalousResponse("Task 2 rationale is empty", raw);

    const auto task3 = text::collapse_whitespace(text::join(sections[3], " "));
    const bool not_applicable = text::normalize(task3) == "n/a" || text::normalize(task3) == "n/a.";
    std::vector<std::string> issues;
    if (!not_applicable) {
        std::unordered_set<std::string> dedup;
        for (const auto& part : text::split(task3, ',')) {
            auto issue = text::normalize(part);
            if (!issue.empty() && dedup.insert(issue).second) issues.push_back(std::move(issue));
        }
    }
    if (concern && issues.empty()) throw AnomalousResponse("Task 1 is Yes but Task 3 lists no issues", raw);
    if (!concern && !issues.empty()) throw AnomalousResponse("Task 1 is No but Task 3 lists issues", raw);
    return CrcResponse{concern, std::move(rationale), std::move(issues)};
}

IssueInventory split_issues(const std::vector<Label>& labels) {
    IssueInventory inv;
    std::unordered_set<std::string> seen;
    for (const auto& label : labels) {
        for (const auto& raw : label.issues) {
            auto issue = text::normalize(raw);
            if (issue.empty()) continue;
            ++inv.total;
            if (seen.insert(issue).second) inv.unique.push_back(std::move(issue));
        }
    }
    return inv;
}

IssueInventory split_issues(const std::vector<LabeledReview>& labeled) {
    std::vector<Label> labels;
    labels.reserve(labeled.size());
    for (const auto& l : labeled) labels.push_back(l.label);
    return split_issues(labels);
}

}  // namespace spmine
