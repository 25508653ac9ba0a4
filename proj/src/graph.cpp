#include "ierisk/graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ierisk/error.hpp"

namespace ierisk {

using nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {"system_root", "screen", "parameter_group",
                                           "parameter", "control"};

bool finite(double v) { return std::isfinite(v); }

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

double number_field(const json& obj, const char* key, const std::string& id) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) {
        throw GraphError(id, std::string("malformed coordinates: '") + key + "' missing or not a number");
    }
    const double v = it->get<double>();
    if (!finite(v)) throw GraphError(id, std::string("malformed coordinates: '") + key + "' not finite");
    return v;
}

std::string string_field(const json& obj, const char* key, const std::string& id) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw GraphError(id, std::string("field '") + key + "' missing or not a string");
    }
    return it->get<std::string>();
}

const std::vector<std::string> kNoChildren;

} // namespace

std::string_view to_string(ElementKind kind) noexcept {
    return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<ElementKind> parse_element_kind(std::string_view text) noexcept {
    for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
        if (kKindNames[i] == text) return static_cast<ElementKind>(i);
    }
    return std::nullopt;
}

InterfaceGraph InterfaceGraph::from_parts(std::vector<Screen> screens,
                                          std::vector<InterfaceElement> elements) {
    InterfaceGraph g;
    g.screens_ = std::move(screens);
    g.elements_ = std::move(elements);
    for (std::size_t i = 0; i < g.screens_.size(); ++i) g.screen_index_.emplace(g.screens_[i].id, i);
    for (std::size_t i = 0; i < g.elements_.size(); ++i) {
        g.element_index_.emplace(g.elements_[i].id, i);  // first occurrence wins
    }
    for (const auto& e : g.elements_) {
        if (e.parent) g.children_[*e.parent].push_back(e.id);
    }
    return g;
}

const InterfaceElement* InterfaceGraph::find(std::string_view id) const {
    auto it = element_index_.find(std::string(id));
    return it == element_index_.end() ? nullptr : &elements_[it->second];
}

const Screen* InterfaceGraph::find_screen(std::string_view id) const {
    auto it = screen_index_.find(std::string(id));
    return it == screen_index_.end() ? nullptr : &screens_[it->second];
}

const std::vector<std::string>& InterfaceGraph::children(std::string_view id) const {
    auto it = children_.find(std::string(id));
    return it == children_.end() ? kNoChildren : it->second;
}

bool InterfaceGraph::is_leaf(std::string_view id) const { return children(id).empty(); }

std::vector<std::string> InterfaceGraph::roots() const {
    std::vector<std::string> out;
    for (const auto& e : elements_) {
        if (!e.parent) out.push_back(e.id);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> InterfaceGraph::edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : elements_) {
        if (e.parent) out.emplace_back(*e.parent, e.id);
    }
    return out;
}

std::vector<const InterfaceElement*> InterfaceGraph::on_screen(std::string_view screen_id) const {
    std::vector<const InterfaceElement*> out;
    for (const auto& e : elements_) {
        if (e.screen_id == screen_id) out.push_back(&e);
    }
    return out;
}

double InterfaceGraph::layout_diagonal() const noexcept {
    double w = 0.0;
    double h = 0.0;
    for (const auto& s : screens_) {
        w = std::max(w, s.width_px);
        h = std::max(h, s.height_px);
    }
    return std::hypot(w, h);
}

std::string InterfaceGraph::root_of(std::string_view id) const {
    const InterfaceElement* e = find(id);
    std::size_t steps = 0;
    while (e && e->parent) {
        if (++steps > elements_.size()) return {};
        e = find(*e->parent);
    }
    return e ? e->id : std::string{};
}

std::string path_id_for(std::string_view node_id) {
    if (node_id.starts_with("N_")) return "P_" + std::string(node_id.substr(2));
    return "P_" + std::string(node_id);
}

std::string node_id_for(std::string_view path_id) {
    if (!path_id.starts_with("P_")) return std::string(path_id);
    return "N_" + std::string(path_id.substr(2));
}

std::vector<Violation> validate_graph(const InterfaceGraph& g) {
    std::vector<Violation> out;
    const auto& elements = g.elements();

    std::unordered_set<std::string> seen;
    for (const auto& e : elements) {
        if (!seen.insert(e.id).second) out.push_back({e.id, "duplicate-id", "id appears more than once"});
    }

    bool any_root = false;
    for (const auto& e : elements) {
        if (!finite(e.position.x) || !finite(e.position.y)) {
            out.push_back({e.id, "coordinates", "position is not finite"});
        }
        if (!g.find_screen(e.screen_id)) {
            out.push_back({e.id, "unknown-screen", "screen '" + e.screen_id + "' not declared"});
        }
        if (e.bbox) {
            const auto& b = *e.bbox;
            if (!(finite(b.x) && finite(b.y) && finite(b.width) && finite(b.height)) ||
                b.width <= 0.0 || b.height <= 0.0) {
                out.push_back({e.id, "bbox-size", "bbox width and height must be positive"});
            } else if (!b.contains(e.position)) {
                out.push_back({e.id, "position-outside-bbox", "element center lies outside its bbox"});
            }
        }

        if (!e.parent) {
            any_root = true;
            if (e.kind != ElementKind::system_root) {
                out.push_back({e.id, "root-kind", "parentless element must be a system_root"});
            }
            continue;
        }
        if (e.kind == ElementKind::system_root) {
            out.push_back({e.id, "root-kind", "system_root must not have a parent"});
        }
        if (*e.parent == e.id) {
            out.push_back({e.id, "cycle", "element is its own parent"});
            continue;
        }
        if (!g.find(*e.parent)) {
            out.push_back({e.id, "dangling-parent", "parent '" + *e.parent + "' does not exist"});
            continue;
        }

        // Walk towards the root; revisiting a node means the chain never ends.
        std::unordered_set<std::string> visited{e.id};
        const InterfaceElement* cur = g.find(*e.parent);
        while (cur && cur->parent) {
            if (!visited.insert(cur->id).second) break;
            cur = g.find(*cur->parent);
        }
        if (cur && cur->parent) {
            const bool on_cycle = visited.contains(cur->id) && cur->id == e.id;
            out.push_back({e.id, on_cycle ? "cycle" : "unreachable",
                           on_cycle ? "parent chain loops back to this element"
                                    : "parent chain enters a cycle"});
        } else if (!cur) {
            out.push_back({e.id, "unreachable", "parent chain is broken"});
        }
    }

    if (!any_root) out.push_back({"", "no-roots", "graph has no roots"});
    if (!(g.layout_diagonal() > 0.0)) {
        out.push_back({"", "layout", "layout diagonal must be positive"});
    }
    return out;
}

InterfaceGraph parse_graph(const json& doc) {
    if (!doc.is_object()) throw GraphError("", "graph document must be a JSON object");

    std::vector<Screen> screens;
    if (auto it = doc.find("screens"); it != doc.end()) {
        if (!it->is_array()) throw GraphError("", "'screens' must be an array");
        for (const auto& s : *it) {
            if (!s.is_object()) throw GraphError("", "screen entry must be an object");
            Screen sc;
            sc.id = string_field(s, "id", "");
            sc.width_px = number_field(s, "width_px", sc.id);
            sc.height_px = number_field(s, "height_px", sc.id);
            if (sc.width_px <= 0.0 || sc.height_px <= 0.0) {
                throw GraphError(sc.id, "malformed coordinates: screen extent must be positive");
            }
            screens.push_back(std::move(sc));
        }
    }

    std::vector<InterfaceElement> elements;
    auto it = doc.find("elements");
    if (it != doc.end() && !it->is_array()) throw GraphError("", "'elements' must be an array");
    std::unordered_set<std::string> ids;
    if (it != doc.end()) {
        for (const auto& raw : *it) {
            if (!raw.is_object()) throw GraphError("", "element entry must be an object");
            InterfaceElement e;
            e.id = string_field(raw, "id", "");
            if (e.id.empty()) throw GraphError("", "element id must be nonempty");
            if (!ids.insert(e.id).second) throw GraphError(e.id, "duplicate id");
            e.name = string_field(raw, "name", e.id);
            const auto kind_text = string_field(raw, "kind", e.id);
            auto kind = parse_element_kind(kind_text);
            if (!kind) throw GraphError(e.id, "unknown element kind '" + kind_text + "'");
            e.kind = *kind;
            e.screen_id = string_field(raw, "screen", e.id);
            e.position = {number_field(raw, "x", e.id), number_field(raw, "y", e.id)};
            if (auto b = raw.find("bbox"); b != raw.end() && !b->is_null()) {
                if (!b->is_array() || b->size() != 4) {
                    throw GraphError(e.id, "malformed coordinates: bbox must be [x, y, w, h]");
                }
                std::array<double, 4> v{};
                for (std::size_t i = 0; i < 4; ++i) {
                    if (!(*b)[i].is_number() || !finite((*b)[i].get<double>())) {
                        throw GraphError(e.id, "malformed coordinates: bbox entries must be finite numbers");
                    }
                    v[i] = (*b)[i].get<double>();
                }
                e.bbox = BBox{v[0], v[1], v[2], v[3]};
            }
            if (auto p = raw.find("parent"); p != raw.end() && !p->is_null()) {
                if (!p->is_string()) throw GraphError(e.id, "parent must be a string");
                e.parent = p->get<std::string>();
            }
            elements.push_back(std::move(e));
        }
    }

    for (const auto& e : elements) {
        if (e.parent && !ids.contains(*e.parent)) {
            throw GraphError(e.id, "dangling parent reference '" + *e.parent + "'");
        }
    }
    if (std::none_of(elements.begin(), elements.end(), [](const auto& e) { return !e.parent; })) {
        throw GraphError("", "graph has no roots");
    }

    return InterfaceGraph::from_parts(std::move(screens), std::move(elements));
}

InterfaceGraph load_graph(const json& doc) {
    auto graph = parse_graph(doc);
    if (auto violations = validate_graph(graph); !violations.empty()) {
        const auto& v = violations.front();
        throw GraphError(v.element_id, v.rule + ": " + v.detail);
    }
    return graph;
}

InterfaceGraph load_graph_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open graph file " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(0, file.string() + ": " + e.what());
    }
    return load_graph(doc);
}

json graph_to_json(const InterfaceGraph& g) {
    json screens = json::array();
    for (const auto& s : g.screens()) {
        screens.push_back({{"id", s.id}, {"width_px", s.width_px}, {"height_px", s.height_px}});
    }
    json elements = json::array();
    for (const auto& e : g.elements()) {
        json j{{"id", e.id},
               {"name", e.name},
               {"kind", to_string(e.kind)},
               {"screen", e.screen_id},
               {"x", e.position.x},
               {"y", e.position.y}};
        if (e.bbox) j["bbox"] = {e.bbox->x, e.bbox->y, e.bbox->width, e.bbox->height};
        if (e.parent) j["parent"] = *e.parent;
        elements.push_back(std::move(j));
    }
    return {{"screens", std::move(screens)}, {"elements", std::move(elements)}};
}

ExecutionPath resolve_path(const InterfaceGraph& g, std::string_view path_id) {
    const std::string node = node_id_for(path_id);
    const InterfaceElement* e = g.find(node);
    if (!e) throw GraphError(std::string(path_id), "unknown path_id");

    ExecutionPath path;
    path.path_id = std::string(path_id);
    std::set<std::string> screens;
    std::size_t steps = 0;
    while (e) {
        path.node_chain.push_back(e->id);
        screens.insert(e->screen_id);
        if (!e->parent) break;
        if (++steps > g.elements().size()) throw GraphError(node, "parent chain does not terminate");
        e = g.find(*e->parent);
    }
    std::reverse(path.node_chain.begin(), path.node_chain.end());
    path.multi_action = screens.size() > 1;
    return path;
}

ExecutionPath map_procedure_step(const InterfaceGraph& g, std::string_view step_text,
                                 const NameSimilarity& similarity,
                                 const StepMappingOptions& options) {
    if (g.elements().empty()) throw InvalidArgument("cannot map a step onto an empty graph");
    const auto trimmed_begin = step_text.find_first_not_of(" \t\r\n");
    if (trimmed_begin == std::string_view::npos) throw InvalidArgument("step text is empty");

    const std::string text = lower_ascii(step_text);

    struct Match {
        const InterfaceElement* element;
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Match> matches;
    for (const auto& e : g.elements()) {
        if (e.name.empty()) continue;
        const std::string name = lower_ascii(e.name);
        for (auto pos = text.find(name); pos != std::string::npos; pos = text.find(name, pos + 1)) {
            const std::size_t end = pos + name.size();
            const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]) || !is_word_char(name.front());
            const bool right_ok = end == text.size() || !is_word_char(text[end]) || !is_word_char(name.back());
            if (left_ok && right_ok) {
                matches.push_back({&e, pos, end});
                break;
            }
        }
    }

    if (!matches.empty()) {
        // Drop matches whose span sits inside a longer match ("Pump" inside
        // "Main Pump Start").
        std::vector<Match> outer;
        for (const auto& m : matches) {
            const bool nested = std::any_of(matches.begin(), matches.end(), [&](const Match& o) {
                return &o != &m && o.begin <= m.begin && m.end <= o.end &&
                       (o.end - o.begin) > (m.end - m.begin);
            });
            if (!nested) outer.push_back(m);
        }
        const auto best = std::min_element(outer.begin(), outer.end(), [](const Match& a, const Match& b) {
            const auto la = a.end - a.begin;
            const auto lb = b.end - b.begin;
            if (la != lb) return la > lb;
            return a.element->id < b.element->id;
        });
        ExecutionPath path = resolve_path(g, path_id_for(best->element->id));
        std::set<std::string> referenced_leaves;
        for (const auto& m : outer) {
            if (g.is_leaf(m.element->id)) referenced_leaves.insert(m.element->id);
        }
        path.multi_action = path.multi_action || referenced_leaves.size() > 1;
        return path;
    }

    const InterfaceElement* best = nullptr;
    double best_score = -2.0;
    for (const auto& e : g.elements()) {
        if (!g.is_leaf(e.id) || e.name.empty()) continue;
        const double s = similarity(step_text, e.name);
        if (s > best_score || (s == best_score && best && e.id < best->id)) {
            best = &e;
            best_score = s;
        }
    }
    if (!best || best_score < options.similarity_floor) {
        throw InvalidArgument("unmappable step: no element name reaches similarity " +
                              std::to_string(options.similarity_floor));
    }
    return resolve_path(g, path_id_for(best->id));
}

} // namespace ierisk
