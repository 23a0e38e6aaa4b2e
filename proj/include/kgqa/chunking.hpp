#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/annotation.hpp"
#include "kgqa/error.hpp"

namespace kgqa::chunking {

enum class ChunkKind { WHNP, WHVP, INNP, VP, NP };

/// Matching priority: interrogative chunks first, then preposition-led NPs, VPs, NPs.
inline constexpr ChunkKind kPriority[] = {ChunkKind::WHNP, ChunkKind::WHVP, ChunkKind::INNP,
                                          ChunkKind::VP, ChunkKind::NP};

std::string_view kind_name(ChunkKind kind) noexcept;
std::optional<ChunkKind> parse_kind(std::string_view name) noexcept;

class PatternError : public Error {
public:
    PatternError(std::size_t position, const std::string& message)
        : Error(ErrorCode::parse, "pattern position " + std::to_string(position) + ": " + message),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// A compiled parsing expression over POS tags.
///
/// Syntax: tags (`NN`, `WP$`), tag families (`NN.*`), grouping `( )`, alternation `|`,
/// quantifiers `?` `*` `+`. Whitespace is ignored and a `-` at the end of a line joins
/// it with the next one.
class ParsingExpression {
public:
    static ParsingExpression compile(ChunkKind kind, std::string_view pattern);

    ChunkKind kind() const noexcept { return kind_; }
    const std::string& pattern() const noexcept { return pattern_; }

    /// Length of the longest match of tags[start..], if any.
    std::optional<std::size_t> longest_match(std::span<const std::string> tags,
                                             std::size_t start = 0) const;

    struct Program;

private:
    ParsingExpression(ChunkKind kind, std::string pattern, std::shared_ptr<const Program> program)
        : kind_(kind), pattern_(std::move(pattern)), program_(std::move(program)) {}

    ChunkKind kind_;
    std::string pattern_;
    std::shared_ptr<const Program> program_;
};

using Grammar = std::vector<ParsingExpression>;

/// The built-in subconstituent table.
const Grammar& default_grammar();

/// One `KIND: pattern` per line; `#` comments; trailing `-` continues the pattern.
Grammar load_grammar(std::istream& in);

struct Span {
    int start = 0; // 1-based, inclusive
    int end = 0;   // inclusive

    int length() const noexcept { return end - start + 1; }
    bool contains(int index) const noexcept { return index >= start && index <= end; }
    friend bool operator==(const Span&, const Span&) = default;
};

struct Chunk {
    ChunkKind kind = ChunkKind::NP;
    Span span;
    std::string text;
    /// Inner NP of a WHNP (after the wh-determiner) or inner VP of a WHVP.
    std::optional<Span> inner;
};

std::vector<Chunk> chunk(const annotation::AnnotatedQuery& q, const Grammar& grammar = default_grammar());

/// Per-kind 1-based views over a chunking: WHNP_i, VP_s, and word accessors.
class ChunkIndex {
public:
    explicit ChunkIndex(const std::vector<Chunk>& chunks);

    std::size_t count(ChunkKind kind) const;
    const Chunk& at(ChunkKind kind, std::size_t i) const;
    /// Token index of the f-th word of the i-th chunk of `kind` (both 1-based).
    int word(ChunkKind kind, std::size_t i, std::size_t f) const;
    /// Chunk of `kind` that contains the token, if any.
    const Chunk* containing(ChunkKind kind, int token) const;

private:
    std::map<ChunkKind, std::vector<Chunk>> by_kind_;
};

std::string describe(const std::vector<Chunk>& chunks);

} // namespace kgqa::chunking
