#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ierisk/similarity.hpp"

namespace ierisk {

enum class ElementKind { system_root, screen, parameter_group, parameter, control };

std::string_view to_string(ElementKind kind) noexcept;
std::optional<ElementKind> parse_element_kind(std::string_view text) noexcept;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct BBox {
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
    double height = 0.0;

    // Closed on all sides.
    bool contains(Point p) const noexcept {
        return p.x >= x && p.x <= x + width && p.y >= y && p.y <= y + height;
    }
    double area() const noexcept { return width * height; }
    Point center() const noexcept { return {x + width / 2.0, y + height / 2.0}; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct InterfaceElement {
    std::string id;
    std::string name;
    ElementKind kind = ElementKind::parameter;
    std::string screen_id;
    Point position;
    std::optional<BBox> bbox;
    std::optional<std::string> parent;
};

struct Screen {
    std::string id;
    double width_px = 0.0;
    double height_px = 0.0;
};

struct Violation {
    std::string element_id;
    std::string rule;
    std::string detail;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ExecutionPath {
    std::string path_id;
    std::vector<std::string> node_chain;
    bool multi_action = false;

    const std::string& terminal() const { return node_chain.back(); }

    friend bool operator==(const ExecutionPath&, const ExecutionPath&) = default;
};

// The interface-embedded knowledge graph. Immutable once built; every query
// is const and safe to call from any number of threads.
class InterfaceGraph {
public:
    InterfaceGraph() = default;

    // Builds the indices without validating. load_graph() is the checked entry
    // point; this exists so validate_graph() can be exercised on broken input.
    static InterfaceGraph from_parts(std::vector<Screen> screens,
                                     std::vector<InterfaceElement> elements);

    const std::vector<InterfaceElement>& elements() const noexcept { return elements_; }
    const std::vector<Screen>& screens() const noexcept { return screens_; }

    const InterfaceElement* find(std::string_view id) const;
    const Screen* find_screen(std::string_view id) const;

    // Children in declaration order.
    const std::vector<std::string>& children(std::string_view id) const;
    bool is_leaf(std::string_view id) const;
    std::vector<std::string> roots() const;
    std::vector<std::pair<std::string, std::string>> edges() const;

    // Elements whose screen is screen_id, in declaration order.
    std::vector<const InterfaceElement*> on_screen(std::string_view screen_id) const;

    // Diagonal of the union of all screen extents (all screens share the origin).
    double layout_diagonal() const noexcept;

    // Root of the tree containing id (the id itself for roots). Empty when the
    // parent chain is broken.
    std::string root_of(std::string_view id) const;

private:
    std::vector<Screen> screens_;
    std::vector<InterfaceElement> elements_;
    std::unordered_map<std::string, std::size_t> element_index_;
    std::unordered_map<std::string, std::size_t> screen_index_;
    std::unordered_map<std::string, std::vector<std::string>> children_;
};

// Path identifiers: P_x names the path ending at N_x. Ids without the N_
// prefix map to "P_" + id.
std::string path_id_for(std::string_view node_id);
std::string node_id_for(std::string_view path_id);

InterfaceGraph load_graph(const nlohmann::json& document);
// Structural parse only; validate_graph() then reports every rule violation.
InterfaceGraph parse_graph(const nlohmann::json& document);
InterfaceGraph load_graph_file(const std::filesystem::path& file);
nlohmann::json graph_to_json(const InterfaceGraph& graph);

std::vector<Violation> validate_graph(const InterfaceGraph& graph);

ExecutionPath resolve_path(const InterfaceGraph& graph, std::string_view path_id);

struct StepMappingOptions {
    double similarity_floor = 0.5;
};

// Resolves a procedure step to the path of the element it targets. An element
// name occurring verbatim in the text (longest match wins) takes precedence
// over similarity scoring.
ExecutionPath map_procedure_step(const InterfaceGraph& graph,
                                 std::string_view step_text,
                                 const NameSimilarity& similarity,
                                 const StepMappingOptions& options = {});

} // namespace ierisk
