#pragma once

#include <string>
#include <vector>

namespace spmine {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using ChatMessages = std::vector<ChatMessage>;

}  // namespace spmine
