#include "kgqa/chunking.hpp"

#include <cctype>
#include <istream>
#include <stdexcept>

namespace kgqa::chunking {

struct ParsingExpression::Program {
    enum class Op { tag, split, accept };
    struct State {
        Op op = Op::split;
        std::string tag;
        bool family = false;
        int out = -1;
        int out2 = -1;
    };
    std::vector<State> states;
    int start = -1;

    bool matches(const State& s, const std::string& tag) const {
        return s.family ? tag.compare(0, s.tag.size(), s.tag) == 0 : tag == s.tag;
    }

    void close(int state, std::vector<char>& in_set, std::vector<int>& set) const {
        if (state < 0 || in_set[static_cast<std::size_t>(state)]) return;
        in_set[static_cast<std::size_t>(state)] = 1;
        set.push_back(state);
        const auto& s = states[static_cast<std::size_t>(state)];
        if (s.op == Op::split) {
            close(s.out, in_set, set);
            close(s.out2, in_set, set);
        }
    }
};

namespace {

using Program = ParsingExpression::Program;

struct Fragment {
    int start;
    std::vector<std::pair<int, int>> dangling; // (state, slot)
};

class PatternParser {
public:
    PatternParser(std::string_view src, Program& program) : src_(src), prog_(program) {}

    Fragment parse() {
        skip_space();
        if (pos_ == src_.size()) throw PatternError(0, "empty pattern");
        auto f = parse_alternation();
        skip_space();
        if (pos_ != src_.size()) throw PatternError(pos_, std::string("unexpected '") + src_[pos_] + "'");
        return f;
    }

private:
    int add(Program::Op op, std::string tag = {}, bool family = false) {
        prog_.states.push_back({op, std::move(tag), family, -1, -1});
        return static_cast<int>(prog_.states.size() - 1);
    }

    void patch(const std::vector<std::pair<int, int>>& dangling, int target) {
        for (const auto& [state, slot] : dangling) {
            auto& s = prog_.states[static_cast<std::size_t>(state)];
            (slot == 0 ? s.out : s.out2) = target;
        }
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '-' && continuation_at(pos_)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    bool continuation_at(std::size_t p) const {
        for (std::size_t i = p + 1; i < src_.size(); ++i) {
            if (src_[i] == '\n') return true;
            if (!std::isspace(static_cast<unsigned char>(src_[i]))) return false;
        }
        return true;
    }

    bool at_end_of_term() {
        skip_space();
        return pos_ == src_.size() || src_[pos_] == ')' || src_[pos_] == '|';
    }

    Fragment parse_alternation() {
        auto left = parse_sequence();
        skip_space();
        while (pos_ < src_.size() && src_[pos_] == '|') {
            ++pos_;
            auto right = parse_sequence();
            const int s = add(Program::Op::split);
            prog_.states[static_cast<std::size_t>(s)].out = left.start;
            prog_.states[static_cast<std::size_t>(s)].out2 = right.start;
            left.start = s;
            left.dangling.insert(left.dangling.end(), right.dangling.begin(), right.dangling.end());
            skip_space();
        }
        return left;
    }

    Fragment parse_sequence() {
        if (at_end_of_term()) throw PatternError(pos_, "empty alternative");
        auto seq = parse_quantified();
        while (!at_end_of_term()) {
            auto next = parse_quantified();
            patch(seq.dangling, next.start);
            seq.dangling = std::move(next.dangling);
        }
        return seq;
    }

    Fragment parse_quantified() {
        auto atom = parse_atom();
        while (pos_ < src_.size() && (src_[pos_] == '?' || src_[pos_] == '*' || src_[pos_] == '+')) {
            const char q = src_[pos_++];
            const int s = add(Program::Op::split);
            prog_.states[static_cast<std::size_t>(s)].out = atom.start;
            if (q == '?') {
                atom.start = s;
                atom.dangling.emplace_back(s, 1);
            } else if (q == '*') {
                patch(atom.dangling, s);
                atom = Fragment{s, {{s, 1}}};
            } else {
                patch(atom.dangling, s);
                atom.dangling = {{s, 1}};
            }
        }
        return atom;
    }

    Fragment parse_atom() {
        skip_space();
        if (pos_ == src_.size()) throw PatternError(pos_, "unexpected end of pattern");
        const char c = src_[pos_];
        if (c == '(') {
            const auto open = pos_++;
            auto inner = parse_alternation();
            skip_space();
            if (pos_ == src_.size() || src_[pos_] != ')') throw PatternError(open, "unbalanced '('");
            ++pos_;
            return inner;
        }
        if (c == '?' || c == '*' || c == '+') throw PatternError(pos_, "quantifier without operand");
        const auto begin = pos_;
        while (pos_ < src_.size() &&
               (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '$'))
            ++pos_;
        if (pos_ == begin) throw PatternError(pos_, std::string("unexpected '") + c + "'");
        std::string tag(src_.substr(begin, pos_ - begin));
        bool family = false;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            if (pos_ + 1 >= src_.size() || src_[pos_ + 1] != '*')
                throw PatternError(pos_, "'.' must be followed by '*' in a tag family");
            family = true;
            pos_ += 2;
        }
        const int s = add(Program::Op::tag, std::move(tag), family);
        return Fragment{s, {{s, 0}}};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Program& prog_;
};

} // namespace

std::string_view kind_name(ChunkKind kind) noexcept {
    switch (kind) {
        case ChunkKind::WHNP: return "WHNP";
        case ChunkKind::WHVP: return "WHVP";
        case ChunkKind::INNP: return "INNP";
        case ChunkKind::VP: return "VP";
        case ChunkKind::NP: return "NP";
    }
    return "?";
}

std::optional<ChunkKind> parse_kind(std::string_view name) noexcept {
    for (const auto k : kPriority)
        if (kind_name(k) == name) return k;
    return std::nullopt;
}

ParsingExpression ParsingExpression::compile(ChunkKind kind, std::string_view pattern) {
    auto program = std::make_shared<Program>();
    PatternParser parser(pattern, *program);
    auto frag = parser.parse();
    const int accept = static_cast<int>(program->states.size());
    program->states.push_back({Program::Op::accept, {}, false, -1, -1});
    for (const auto& [state, slot] : frag.dangling) {
        auto& s = program->states[static_cast<std::size_t>(state)];
        (slot == 0 ? s.out : s.out2) = accept;
    }
    program->start = frag.start;

    std::vector<char> in_set(program->states.size(), 0);
    std::vector<int> set;
    program->close(program->start, in_set, set);
    if (in_set[static_cast<std::size_t>(accept)])
        throw PatternError(0, "pattern can match the empty tag sequence");
    return ParsingExpression(kind, std::string(pattern), std::move(program));
}

std::optional<std::size_t> ParsingExpression::longest_match(std::span<const std::string> tags,
                                                            std::size_t start) const {
    const auto& prog = *program_;
    const auto n_states = prog.states.size();
    std::vector<char> in_set(n_states, 0);
    std::vector<int> current;
    prog.close(prog.start, in_set, current);

    std::optional<std::size_t> best;
    for (std::size_t i = start;; ++i) {
        for (const int s : current)
            if (prog.states[static_cast<std::size_t>(s)].op == Program::Op::accept) best = i - start;
        if (i >= tags.size() || current.empty()) break;
        std::vector<char> next_in(n_states, 0);
        std::vector<int> next;
        for (const int s : current) {
            const auto& st = prog.states[static_cast<std::size_t>(s)];
            if (st.op == Program::Op::tag && prog.matches(st, tags[i])) prog.close(st.out, next_in, next);
        }
        current = std::move(next);
    }
    return best;
}

const Grammar& default_grammar() {
    static const Grammar grammar = [] {
        Grammar g;
        g.push_back(ParsingExpression::compile(
            ChunkKind::INNP,
            "(IN)+(CD)*(DT)?(CD)*(JJ)*(CD)*(VBD|VBG)*(NN.*)*(POS)*(CD)*-\n"
            "(VBD|VBG)*(NN.*)* (VBD|VBG)*(NN.*)*(POS)*(CD)*(NN.*)+"));
        g.push_back(ParsingExpression::compile(
            ChunkKind::WHNP,
            "(WDT|WP$)+(CD)*(DT)?(CD)*(JJ)*(CD)*(VBD)*(NN.*)*(POS)*-\n"
            "(CD)*(VBD)*(NN.*)*(VBD)*(NN.*)*(POS)*(CD)*(NN.*)+"));
        g.push_back(ParsingExpression::compile(
            ChunkKind::WHVP,
            "(WP|WRB)+(MD)*(VB.*)+(JJ)*(RB)*(JJ)*(VB.*)?(DT)?(IN*|TO*)+ | (WP|WRB)+(MD)*(VB.*)+"));
        g.push_back(ParsingExpression::compile(
            ChunkKind::NP,
            "(CD)*(DT)?(CD)*(JJ)*(CD)*(VBD|VBG)*(NN.*)*(POS)*(CD)*-\n"
            "(VBD|VBG)*(NN.*)*(VBD|VBG)*(NN.*)*(POS)*(CD)*(NN.*)+"));
        g.push_back(ParsingExpression::compile(
            ChunkKind::VP, "(MD)*(VB.*)+(CD)*(JJ)*(RB)*(JJ)*(VB.*)?(DT)?(IN*|TO*)+"));
        return g;
    }();
    return grammar;
}

Grammar load_grammar(std::istream& in) {
    Grammar g;
    std::string line;
    std::string pending;
    ChunkKind pending_kind = ChunkKind::NP;
    bool has_pending = false;
    std::size_t line_no = 0;
    const auto flush = [&] {
        if (!has_pending) return;
        const ChunkKind kind = pending_kind;
        try {
            g.push_back(ParsingExpression::compile(kind, pending));
        } catch (const PatternError& e) {
            throw ParseError(line_no, std::string(kind_name(kind)) + ": " + e.what());
        }
        pending.clear();
        has_pending = false;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (!has_pending) {
            const auto colon = t.find(':');
            if (colon == std::string_view::npos) throw ParseError(line_no, "expected 'KIND: pattern'");
            const auto parsed = parse_kind(trim(t.substr(0, colon)));
            if (!parsed)
                throw ParseError(line_no, "unknown chunk kind '" + std::string(trim(t.substr(0, colon))) + "'");
            pending_kind = *parsed;
            has_pending = true;
            pending = std::string(trim(t.substr(colon + 1)));
        } else {
            pending += "\n" + std::string(t);
        }
        if (pending.empty() || pending.back() != '-') flush();
    }
    if (has_pending) throw ParseError(line_no, "pattern continues past end of file");
    return g;
}

std::vector<Chunk> chunk(const annotation::AnnotatedQuery& q, const Grammar& grammar) {
    std::vector<std::string> tags;
    tags.reserve(q.size());
    for (const auto& t : q.tokens) tags.push_back(t.pos);

    std::vector<Chunk> chunks;
    std::size_t i = 0;
    while (i < tags.size()) {
        std::optional<std::pair<ChunkKind, std::size_t>> hit;
        for (const auto kind : kPriority) {
            std::size_t best = 0;
            for (const auto& expr : grammar) {
                if (expr.kind() != kind) continue;
                if (const auto len = expr.longest_match(tags, i); len && *len > best) best = *len;
            }
            if (best > 0) {
                hit.emplace(kind, best);
                break;
            }
        }
        if (!hit) {
            ++i;
            continue;
        }
        Chunk c;
        c.kind = hit->first;
        c.span = Span{static_cast<int>(i + 1), static_cast<int>(i + hit->second)};
        std::vector<std::string> forms;
        for (int k = c.span.start; k <= c.span.end; ++k) forms.push_back(q.token(k).form);
        c.text = join(forms, " ");
        if (c.kind == ChunkKind::WHNP || c.kind == ChunkKind::WHVP) {
            int k = c.span.start;
            while (k <= c.span.end) {
                const auto& pos = q.token(k).pos;
                if (pos != "WDT" && pos != "WP$" && pos != "WP" && pos != "WRB") break;
                ++k;
            }
            if (k <= c.span.end) c.inner = Span{k, c.span.end};
        }
        chunks.push_back(std::move(c));
        i += hit->second;
    }
    return chunks;
}

ChunkIndex::ChunkIndex(const std::vector<Chunk>& chunks) {
    for (const auto& c : chunks) by_kind_[c.kind].push_back(c);
}

std::size_t ChunkIndex::count(ChunkKind kind) const {
    const auto it = by_kind_.find(kind);
    return it == by_kind_.end() ? 0 : it->second.size();
}

const Chunk& ChunkIndex::at(ChunkKind kind, std::size_t i) const {
    if (i == 0 || i > count(kind))
        throw std::out_of_range(std::string(kind_name(kind)) + " index " + std::to_string(i) +
                                " out of range");
    return by_kind_.at(kind)[i - 1];
}

int ChunkIndex::word(ChunkKind kind, std::size_t i, std::size_t f) const {
    const auto& c = at(kind, i);
    if (f == 0 || f > static_cast<std::size_t>(c.span.length()))
        throw std::out_of_range("word " + std::to_string(f) + " out of range for " + c.text);
    return c.span.start + static_cast<int>(f) - 1;
}

const Chunk* ChunkIndex::containing(ChunkKind kind, int token) const {
    const auto it = by_kind_.find(kind);
    if (it == by_kind_.end()) return nullptr;
    for (const auto& c : it->second)
        if (c.span.contains(token)) return &c;
    return nullptr;
}

std::string describe(const std::vector<Chunk>& chunks) {
    std::vector<std::string> parts;
    for (const auto& c : chunks) parts.push_back(std::string(kind_name(c.kind)) + "[" + c.text + "]");
    return parts.empty() ? "none" : join(parts, " ");
}

} // namespace kgqa::chunking
