#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spmine/chat.hpp"
#include "spmine/corpus.hpp"
#include "spmine/exemplar.hpp"
#include "spmine/taxonomy.hpp"

namespace spmine {

struct Prompt {
    std::string system;
    std::string user;

    ChatMessages messages() const { return {{"system", system}, {"user", user}}; }
    friend bool operator==(const Prompt&, const Prompt&) = default;
};

using CrcPrompt = Prompt;
using TmPrompt = Prompt;

// Replaces every {{name}} in `tmpl`. Inserted values are not rescanned. Throws
// std::invalid_argument for a placeholder without a value.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

// "Task 1: Yes|No\nTask 2: <rationale>\nTask 3: <issue, issue>|N/A"
std::string render_label(const Label& label);

CrcPrompt render_crc_prompt(const Review& review, const CrcExemplarPair& pair);
CrcPrompt render_crc_prompt(std::string_view text, const CrcExemplarPair& pair);
// Task definitions only, for ablations without examples.
CrcPrompt render_crc_prompt_zero_shot(std::string_view text);

// Lists every theme as "name: definition" in ThemeSet order; examples are labeled A, B, ...
TmPrompt render_tm_prompt(std::string_view issue, const ThemeSet& themes, const TmExemplarSet& exemplars);

Prompt render_customer_loss_prompt(const Review& review);
Prompt render_customer_loss_prompt(std::string_view text);

enum class LossAction { uninstalled, replaced, stopped_using, none };

std::string_view to_string(LossAction action);
// Accepts exactly "1. Uninstalled", "2. Replaced", "3. Stopped Using", "4. None of them"
// (surrounding whitespace ignored). Throws AnomalousResponse otherwise.
LossAction parse_customer_loss(std::string_view response);

// Transcript layout used by the golden files.
std::string format_transcript(const Prompt& prompt);

// --- Fine-tuning export ---------------------------------------------------------

struct FineTuneRecord {
    ChatMessages messages;
};

FineTuneRecord make_record(const Prompt& prompt, std::string assistant);
// Empty string if valid, otherwise the reason.
std::string validate_record(const FineTuneRecord& record);
// Chat JSON lines: {"messages":[{"role":..,"content":..} x3]}. All records are
// validated before anything is written. Throws DataError("InvalidRecord") / ("IoError").
void export_finetune(const std::vector<FineTuneRecord>& records, const std::filesystem::path& path);
std::string finetune_line(const FineTuneRecord& record);

// --- Response parsing -----------------------------------------------------------

using CrcResponse = Label;

// Locates line-initial "Task 1:", "Task 2:", "Task 3:" (case-insensitive, in that
// order, once each). Task 2 runs until the Task 3 line. Task 3 is "N/A" or a comma
// list of issues. Throws AnomalousResponse when the shape is wrong or Task 1 and
// Task 3 disagree.
CrcResponse parse_crc_response(std::string_view response);

struct IssueInventory {
    std::size_t total = 0;
    std::vector<std::string> unique;  // first-occurrence order
};

IssueInventory split_issues(const std::vector<Label>& labels);
IssueInventory split_issues(const std::vector<LabeledReview>& labeled);

}  // namespace spmine
