#pragma once

#include <string_view>

// Text assets compiled into the library from data/ and templates/.
namespace spmine::embedded {

extern const std::string_view taxonomy_json;
extern const std::string_view crc_system;
extern const std::string_view crc_user;
extern const std::string_view crc_user_zero_shot;
extern const std::string_view tm_system;
extern const std::string_view tm_user;
extern const std::string_view tm_example;
extern const std::string_view loss_system;
extern const std::string_view loss_user;

}  // namespace spmine::embedded
