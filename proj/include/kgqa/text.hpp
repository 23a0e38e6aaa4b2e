#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kgqa {

/// One word of a phrase as it arrives from annotation.
struct Word {
    std::string form;
    std::string lemma;
    std::string pos;
};

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Lowercase, trim, and replace internal whitespace runs by a single underscore.
std::string canonical_id(std::string_view surface);

bool is_noun_tag(std::string_view pos);
bool is_verb_tag(std::string_view pos);

} // namespace kgqa
