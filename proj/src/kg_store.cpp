#include "kgqa/kg_store.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "kgqa/error.hpp"

namespace kgqa::kg {

namespace {

constexpr std::string_view kSnapshotFormat = "kgqa-kg-snapshot";
constexpr int kSnapshotVersion = 1;

bool is_comment_or_blank(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> tsv_fields(const std::string& line) {
    auto fields = split(line, '\t');
    for (auto& f : fields) f = std::string(trim(f));
    return fields;
}

std::vector<std::string> closure(const KnowledgeGraph& kg, std::string_view id, bool upward) {
    const auto start = kg.index_of(id);
    if (!start) throw NotFoundError(std::string(id));

    std::vector<std::string> result;
    std::set<KnowledgeGraph::NodeIndex> seen{*start};
    std::vector<KnowledgeGraph::NodeIndex> level{*start};
    while (!level.empty()) {
        std::vector<KnowledgeGraph::NodeIndex> next;
        for (const auto n : level) {
            const auto& incident = upward ? kg.out_edges(n) : kg.in_edges(n);
            for (const auto e : incident) {
                if (kg.edge(e).predicate != kIsA) continue;
                const auto other = upward ? kg.target_of(e) : kg.source_of(e);
                if (seen.insert(other).second) next.push_back(other);
            }
        }
        std::sort(next.begin(), next.end(), [&](auto a, auto b) {
            return kg.entity_at(a).id < kg.entity_at(b).id;
        });
        for (const auto n : next) result.push_back(kg.entity_at(n).id);
        level = std::move(next);
    }
    return result;
}

std::vector<std::string> number_variants(const std::string& id) {
    std::vector<std::string> out;
    const auto ends_with = [&](std::string_view suffix) {
        return id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with("ies")) out.push_back(id.substr(0, id.size() - 3) + "y");
    if (ends_with("ses") || ends_with("xes") || ends_with("ches") || ends_with("shes"))
        out.push_back(id.substr(0, id.size() - 2));
    if (ends_with("s")) out.push_back(id.substr(0, id.size() - 1));
    if (!ends_with("s")) out.push_back(id + "s");
    return out;
}

} // namespace

double WeightConfig::weight_for(std::string_view predicate) const {
    if (auto it = per_predicate.find(std::string(predicate)); it != per_predicate.end())
        return it->second;
    return default_weight;
}

KnowledgeGraph::KnowledgeGraph(WeightConfig weights) : weights_(std::move(weights)) {
    const auto check = [](double w) {
        if (!(w > 0.0 && w < 1.0)) throw ValidationError("edge weight must lie in (0,1)");
    };
    check(weights_.default_weight);
    for (const auto& [p, w] : weights_.per_predicate) check(w);
}

void KnowledgeGraph::require_mutable() const {
    if (frozen_) throw Error(ErrorCode::frozen, "knowledge graph is frozen");
}

const std::string& KnowledgeGraph::ensure_entity(std::string_view surface) {
    const std::string id = canonical_id(surface);
    if (id.empty()) throw ValidationError("empty entity name");
    if (auto it = index_.find(id); it != index_.end()) return entities_[it->second].id;
    require_mutable();
    const NodeIndex n = entities_.size();
    entities_.push_back(Entity{id, {}});
    index_.emplace(id, n);
    out_.emplace_back();
    in_.emplace_back();
    return entities_[n].id;
}

bool KnowledgeGraph::add_edge(std::string_view source, std::string_view predicate,
                              std::string_view target) {
    const auto p = canonical_id(predicate);
    return add_edge(source, p, target, weights_.weight_for(p));
}

bool KnowledgeGraph::add_edge(std::string_view source, std::string_view predicate,
                              std::string_view target, double weight) {
    require_mutable();
    if (!(weight > 0.0 && weight < 1.0)) throw ValidationError("edge weight must lie in (0,1)");
    const auto p = canonical_id(predicate);
    if (p.empty()) throw ValidationError("empty predicate");
    const std::string s = ensure_entity(source);
    const std::string t = ensure_entity(target);
    return insert_edge(RelationEdge{s, p, t, weight});
}

bool KnowledgeGraph::insert_edge(RelationEdge e) {
    auto key = std::make_tuple(e.source, e.predicate, e.target);
    if (edge_keys_.contains(key)) return false;
    const NodeIndex s = index_.at(e.source);
    const NodeIndex t = index_.at(e.target);
    if (e.predicate == kIsA) {
        if (s == t) throw CycleError(e.source + " -> " + e.source);
        if (would_close_is_a_cycle(e.source, e.target))
            throw CycleError(e.source + " -> " + is_a_path(t, s));
    }
    const EdgeIndex idx = edges_.size();
    edges_.push_back(std::move(e));
    endpoints_.emplace_back(s, t);
    out_[s].push_back(idx);
    in_[t].push_back(idx);
    edge_keys_.insert(std::move(key));
    return true;
}

bool KnowledgeGraph::would_close_is_a_cycle(std::string_view child, std::string_view parent) const {
    const auto c = index_of(child);
    const auto p = index_of(parent);
    if (!c || !p) return false;
    if (*c == *p) return true;
    // parent reaches child through is_a?
    std::vector<NodeIndex> stack{*p};
    std::vector<bool> seen(entities_.size(), false);
    seen[*p] = true;
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        if (n == *c) return true;
        for (const auto e : out_[n]) {
            if (edges_[e].predicate != kIsA) continue;
            const auto next = endpoints_[e].second;
            if (!seen[next]) {
                seen[next] = true;
                stack.push_back(next);
            }
        }
    }
    return false;
}

std::string KnowledgeGraph::is_a_path(NodeIndex from, NodeIndex to) const {
    std::vector<NodeIndex> parent(entities_.size(), entities_.size());
    std::deque<NodeIndex> queue{from};
    parent[from] = from;
    while (!queue.empty()) {
        const auto n = queue.front();
        queue.pop_front();
        if (n == to) break;
        for (const auto e : out_[n]) {
            if (edges_[e].predicate != kIsA) continue;
            const auto next = endpoints_[e].second;
            if (parent[next] == entities_.size()) {
                parent[next] = n;
                queue.push_back(next);
            }
        }
    }
    std::vector<std::string> path;
    for (NodeIndex n = to;; n = parent[n]) {
        path.push_back(entities_[n].id);
        if (n == from) break;
    }
    std::reverse(path.begin(), path.end());
    return join(path, " -> ");
}

void KnowledgeGraph::add_alias(std::string_view id, std::string_view alias) {
    require_mutable();
    const auto n = index_of(id);
    if (!n) throw NotFoundError(std::string(id));
    if (alias == id) throw ValidationError("an entity cannot alias itself");
    entities_[*n].aliases.insert(std::string(alias));
}

void KnowledgeGraph::set_synonym(std::string_view alias, std::string_view canonical) {
    require_mutable();
    if (!contains(canonical)) throw NotFoundError(std::string(canonical));
    synonyms_[std::string(alias)] = std::string(canonical);
}

bool KnowledgeGraph::contains(std::string_view id) const {
    return index_.contains(std::string(id));
}

std::optional<KnowledgeGraph::NodeIndex> KnowledgeGraph::index_of(std::string_view id) const {
    if (auto it = index_.find(std::string(id)); it != index_.end()) return it->second;
    return std::nullopt;
}

const Entity& KnowledgeGraph::entity(std::string_view id) const {
    const auto n = index_of(id);
    if (!n) throw NotFoundError(std::string(id));
    return entities_[*n];
}

bool KnowledgeGraph::has_edge(std::string_view source, std::string_view predicate,
                              std::string_view target) const {
    return edge_keys_.contains(
        std::make_tuple(std::string(source), std::string(predicate), std::string(target)));
}

const std::set<std::string>& entity_type_vocabulary() {
    static const std::set<std::string> vocab{"person", "organization", "location", "date",
                                             "time",   "money",        "percent",  "misc"};
    return vocab;
}

KnowledgeGraph load_triples(std::istream& in, WeightConfig weights) {
    KnowledgeGraph kg(std::move(weights));
    load_triples_into(kg, in);
    return kg;
}

void load_triples_into(KnowledgeGraph& kg, std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_comment_or_blank(line)) continue;
        const auto fields = tsv_fields(line);
        if (fields.size() != 3)
            throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                          std::to_string(fields.size()));
        if (fields[0].empty() || fields[1].empty() || fields[2].empty())
            throw ParseError(line_no, "empty field");
        try {
            kg.add_edge(fields[0], fields[1], fields[2]);
        } catch (const CycleError& e) {
            throw CycleError(e.cycle() + " (line " + std::to_string(line_no) + ")");
        }
    }
}

std::vector<SynonymPair> read_synonym_pairs(std::istream& in) {
    std::vector<SynonymPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_comment_or_blank(line)) continue;
        const auto fields = tsv_fields(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw ParseError(line_no, "expected alias<TAB>canonical");
        pairs.emplace_back(fields[0], fields[1]);
    }
    return pairs;
}

std::vector<EquivalenceRule> read_equivalence_rules(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("equivalence rules: ") + e.what());
    }
    const auto& rules = doc.is_object() ? doc.value("rules", nlohmann::json::array()) : doc;
    if (!rules.is_array()) throw FormatError("equivalence rules: expected an array of rules");
    std::vector<EquivalenceRule> out;
    try {
        for (const auto& r : rules) {
            EquivalenceRule rule;
            rule.trigger_predicate = r.at("if").at("predicate").get<std::string>();
            rule.trigger_object = r.at("if").at("object").get<std::string>();
            rule.derived_predicate = r.at("then").at("predicate").get<std::string>();
            rule.derived_objects = r.at("then").at("objects").get<std::vector<std::string>>();
            out.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("equivalence rules: ") + e.what());
    }
    return out;
}

std::vector<TypeAssertion> read_type_assertions(std::istream& in) {
    std::vector<TypeAssertion> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_comment_or_blank(line)) continue;
        const auto fields = tsv_fields(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw ParseError(line_no, "expected entity<TAB>type");
        out.push_back({fields[0], fields[1]});
    }
    return out;
}

std::vector<SynonymPair> synonym_pairs_from_edges(const KnowledgeGraph& kg) {
    std::vector<SynonymPair> pairs;
    for (const auto& e : kg.edges())
        if (e.predicate == kIsSynonymOf) pairs.emplace_back(e.source, e.target);
    return pairs;
}

std::size_t apply_synonyms(KnowledgeGraph& kg, std::span<const SynonymPair> pairs) {
    kg.require_mutable();
    if (pairs.empty()) return 0;

    std::map<std::string, std::string> parent;
    const auto root = [&](std::string id) {
        for (auto it = parent.find(id); it != parent.end(); it = parent.find(id)) id = it->second;
        return id;
    };
    for (const auto& [raw_alias, raw_canonical] : pairs) {
        const auto alias = canonical_id(raw_alias);
        const auto canonical = canonical_id(raw_canonical);
        if (alias == canonical) {
            spdlog::warn("synonym pair ({}, {}) maps an entity to itself; ignored", alias, canonical);
            continue;
        }
        if (parent.contains(alias)) {
            spdlog::warn("alias {} already mapped to {}; ignoring ({}, {})", alias, parent[alias],
                         alias, canonical);
            continue;
        }
        if (root(canonical) == alias) {
            spdlog::warn("synonym pair ({}, {}) would form a loop; ignored", alias, canonical);
            continue;
        }
        parent[alias] = canonical;
    }

    std::map<std::string, std::string> merge; // alias entity -> final canonical
    std::map<std::string, std::string> table = kg.synonyms_;
    for (const auto& [alias, _] : parent) {
        const auto target = root(alias);
        const bool alias_exists = kg.contains(alias);
        const bool target_exists = kg.contains(target);
        if (!alias_exists && !target_exists) {
            spdlog::warn("synonym ({}, {}): neither entity exists; ignored", alias, target);
            continue;
        }
        if (alias_exists) merge[alias] = target;
        table[alias] = target;
    }
    const auto renamed = [&](const std::string& id) {
        auto it = merge.find(id);
        return it == merge.end() ? id : it->second;
    };
    for (auto& [alias, canonical] : table) canonical = renamed(canonical);

    KnowledgeGraph next(kg.weights_);
    for (const auto& e : kg.entities_) {
        const auto& id = renamed(e.id);
        next.ensure_entity(id);
    }
    for (const auto& e : kg.entities_) {
        auto& into = next.entities_[*next.index_of(renamed(e.id))];
        for (const auto& a : e.aliases) into.aliases.insert(a);
        if (into.id != e.id) into.aliases.insert(e.id);
    }
    for (const auto& e : kg.edges_) {
        RelationEdge moved{renamed(e.source), e.predicate, renamed(e.target), e.weight};
        if (moved.source == moved.target && e.source != e.target &&
            (moved.predicate == kIsA || moved.predicate == kIsSynonymOf))
            continue;
        next.insert_edge(std::move(moved));
    }
    next.synonyms_ = std::move(table);
    for (auto& ent : next.entities_) ent.aliases.erase(ent.id);

    kg = std::move(next);
    return merge.size();
}

std::size_t derive_head_hierarchy(KnowledgeGraph& kg) {
    std::vector<std::pair<std::string, std::string>> found;
    for (const auto& e : kg.entities()) {
        const auto tokens = split(e.id, '_');
        for (std::size_t start = 1; start < tokens.size(); ++start) {
            const auto head = join({tokens.begin() + static_cast<long>(start), tokens.end()}, "_");
            if (!head.empty() && kg.contains(head)) found.emplace_back(e.id, head);
        }
    }
    std::size_t added = 0;
    for (const auto& [child, head] : found) {
        if (kg.has_edge(child, kIsA, head)) continue;
        if (kg.would_close_is_a_cycle(child, head)) {
            spdlog::warn("head rule ({} is_a {}) would close an is_a cycle; skipped", child, head);
            continue;
        }
        added += kg.add_edge(child, kIsA, head) ? 1 : 0;
    }
    return added;
}

std::size_t expand_equivalence(KnowledgeGraph& kg, std::span<const EquivalenceRule> rules) {
    std::size_t added = 0;
    for (const auto& rule : rules) {
        const auto trigger_p = canonical_id(rule.trigger_predicate);
        const auto trigger_o = canonical_id(rule.trigger_object);
        const auto derived_p = canonical_id(rule.derived_predicate);
        std::vector<std::string> holders;
        if (const auto obj = kg.index_of(trigger_o)) {
            for (const auto e : kg.in_edges(*obj))
                if (kg.edge(e).predicate == trigger_p) holders.push_back(kg.edge(e).source);
        }
        for (const auto& holder : holders) {
            for (const auto& target : rule.derived_objects) {
                const auto t = canonical_id(target);
                if (derived_p == kIsA && kg.would_close_is_a_cycle(holder, t)) {
                    spdlog::warn("equivalence ({} is_a {}) would close a cycle; skipped", holder, t);
                    continue;
                }
                added += kg.add_edge(holder, derived_p, t) ? 1 : 0;
            }
        }
    }
    return added;
}

std::size_t apply_entity_types(KnowledgeGraph& kg, std::span<const TypeAssertion> assertions) {
    std::size_t added = 0;
    for (const auto& a : assertions) {
        const auto type = canonical_id(a.type);
        if (!entity_type_vocabulary().contains(type))
            throw ValidationError("unknown entity type '" + a.type + "'");
        const auto id = canonical_id(a.entity);
        if (!kg.contains(id)) {
            spdlog::warn("type assertion for unknown entity {}; skipped", id);
            continue;
        }
        if (kg.would_close_is_a_cycle(id, type)) {
            spdlog::warn("type assertion ({} is_a {}) would close a cycle; skipped", id, type);
            continue;
        }
        added += kg.add_edge(id, kIsA, type) ? 1 : 0;
    }
    return added;
}

std::vector<std::string> superclasses(const KnowledgeGraph& kg, std::string_view id) {
    return closure(kg, id, true);
}

std::vector<std::string> subclasses(const KnowledgeGraph& kg, std::string_view id) {
    return closure(kg, id, false);
}

bool is_a_acyclic(const KnowledgeGraph& kg) {
    const auto n = kg.entity_count();
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t e = 0; e < kg.edge_count(); ++e)
        if (kg.edge(e).predicate == kIsA) ++indegree[kg.target_of(e)];
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::size_t visited = 0;
    while (!ready.empty()) {
        const auto v = ready.back();
        ready.pop_back();
        ++visited;
        for (const auto e : kg.out_edges(v)) {
            if (kg.edge(e).predicate != kIsA) continue;
            if (--indegree[kg.target_of(e)] == 0) ready.push_back(kg.target_of(e));
        }
    }
    return visited == n;
}

std::string canonical_phrase(std::span<const Word> phrase) {
    std::vector<std::string> parts;
    for (const auto& w : phrase) {
        const bool use_lemma = is_noun_tag(w.pos) && !w.lemma.empty() && w.lemma != "_";
        for (auto& piece : split_whitespace(to_lower(use_lemma ? w.lemma : w.form)))
            parts.push_back(std::move(piece));
    }
    return join(parts, "_");
}

std::string link_entity(const KnowledgeGraph& kg, std::span<const Word> phrase) {
    if (phrase.empty()) throw ValidationError("cannot link an empty phrase");
    std::vector<std::string> surface_parts;
    for (const auto& w : phrase)
        for (auto& piece : split_whitespace(to_lower(w.form))) surface_parts.push_back(piece);
    const auto lemma_form = canonical_phrase(phrase);
    const auto surface_form = join(surface_parts, "_");

    const auto resolve = [&](const std::string& id) -> std::optional<std::string> {
        if (kg.contains(id)) return id;
        if (auto it = kg.synonym_map().find(id); it != kg.synonym_map().end()) return it->second;
        return std::nullopt;
    };
    for (const auto& form : {lemma_form, surface_form})
        if (auto hit = resolve(form)) return *hit;
    for (const auto& form : {lemma_form, surface_form})
        for (const auto& variant : number_variants(form))
            if (auto hit = resolve(variant)) return *hit;
    throw LinkFailure(lemma_form);
}

std::vector<Word> words_of(std::string_view id) {
    std::vector<Word> words;
    for (auto& token : split(id, '_'))
        if (!token.empty()) words.push_back(Word{token, token, "NN"});
    return words;
}

void save_snapshot(const KnowledgeGraph& kg, std::ostream& out) {
    nlohmann::json doc;
    doc["format"] = kSnapshotFormat;
    doc["version"] = kSnapshotVersion;
    doc["weights"] = {{"default", kg.weights().default_weight},
                      {"per_predicate", kg.weights().per_predicate}};
    auto entities = nlohmann::json::array();
    for (const auto& e : kg.entities())
        entities.push_back({{"id", e.id}, {"aliases", e.aliases}});
    doc["entities"] = std::move(entities);
    auto edges = nlohmann::json::array();
    for (const auto& e : kg.edges())
        edges.push_back(nlohmann::json::array({e.source, e.predicate, e.target, e.weight}));
    doc["edges"] = std::move(edges);
    doc["synonyms"] = kg.synonym_map();
    out << doc.dump() << '\n';
    if (!out) throw FormatError("failed to write snapshot");
}

void save_snapshot(const KnowledgeGraph& kg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    save_snapshot(kg, out);
}

KnowledgeGraph load_snapshot(std::istream& in) {
    try {
        const auto doc = nlohmann::json::parse(in);
        if (doc.value("format", "") != kSnapshotFormat) throw FormatError("not a kgqa snapshot");
        if (doc.value("version", 0) != kSnapshotVersion)
            throw FormatError("unsupported snapshot version " +
                              std::to_string(doc.value("version", 0)));
        WeightConfig weights;
        weights.default_weight = doc.at("weights").at("default").get<double>();
        weights.per_predicate =
            doc.at("weights").at("per_predicate").get<std::map<std::string, double>>();
        KnowledgeGraph kg(std::move(weights));
        for (const auto& e : doc.at("entities")) {
            const auto id = e.at("id").get<std::string>();
            if (kg.ensure_entity(id) != id) throw FormatError("non-canonical entity id " + id);
        }
        for (const auto& e : doc.at("edges")) {
            const auto s = e.at(0).get<std::string>();
            const auto t = e.at(2).get<std::string>();
            if (!kg.contains(s) || !kg.contains(t)) throw FormatError("edge references unknown entity");
            kg.add_edge(s, e.at(1).get<std::string>(), t, e.at(3).get<double>());
        }
        for (const auto& e : doc.at("entities"))
            for (const auto& a : e.at("aliases"))
                kg.add_alias(e.at("id").get<std::string>(), a.get<std::string>());
        for (const auto& [alias, canonical] : doc.at("synonyms").items()) {
            if (!kg.contains(canonical.get<std::string>()))
                throw FormatError("synonym points to unknown entity");
            kg.set_synonym(alias, canonical.get<std::string>());
        }
        return kg;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt snapshot: ") + e.what());
    }
}

KnowledgeGraph load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open snapshot " + path.string());
    return load_snapshot(in);
}

} // namespace kgqa::kg
