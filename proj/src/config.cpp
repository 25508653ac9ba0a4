#include "ierisk/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ierisk/embed.hpp"
#include "ierisk/error.hpp"

namespace ierisk {

using nlohmann::json;

ToolConfig load_config(const json& j) {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    ToolConfig c;
    try {
        if (auto p = j.find("paths"); p != j.end()) {
            for (const auto& [k, v] : p->items()) c.paths[k] = v.get<std::string>();
        }
        if (auto e = j.find("embed"); e != j.end()) {
            c.embed.provider = e->value("provider", c.embed.provider);
            c.embed.model = e->value("model", c.embed.model);
            c.embed.endpoint = e->value("endpoint", c.embed.endpoint);
            c.embed.timeout_ms = e->value("timeout_ms", c.embed.timeout_ms);
            if (auto d = e->find("cache_dir"); d != e->end() && !d->is_null()) c.embed.cache_dir = d->get<std::string>();
            if (c.embed.provider != "local" && c.embed.provider != "remote") {
                throw InvalidArgument("embed.provider must be \"local\" or \"remote\"");
            }
        }
        if (auto r = j.find("riskpath"); r != j.end()) {
            c.time.tau = r->value("tau", c.time.tau);
            c.time.sigma = r->value("sigma", c.time.sigma);
            c.errors.alpha = r->value("alpha", c.errors.alpha);
            c.errors.min_error_rate = r->value("min_error_rate", c.errors.min_error_rate);
        }
        if (auto m = j.find("metrics"); m != j.end()) {
            c.metrics.theta = m->value("theta", c.metrics.theta);
            c.metrics.pairwise_sid = m->value("pairwise_sid", c.metrics.pairwise_sid);
            if (auto n = m->find("normalizer_px"); n != m->end() && !n->is_null()) c.metrics.normalizer_px = n->get<double>();
        }
        if (auto p = j.find("pif"); p != j.end()) {
            c.pif_seed = p->value("seed", c.pif_seed);
            c.cv_folds = p->value("folds", c.cv_folds);
            if (auto h = p->find("hyper"); h != p->end()) {
                auto& hp = c.pif_hyper;
                hp.epochs = h->value("epochs", hp.epochs);
                hp.learning_rate = h->value("learning_rate", hp.learning_rate);
                hp.beta1 = h->value("beta1", hp.beta1);
                hp.beta2 = h->value("beta2", hp.beta2);
                hp.adam_epsilon = h->value("adam_epsilon", hp.adam_epsilon);
                hp.dropout = h->value("dropout", hp.dropout);
                hp.bn_momentum = h->value("bn_momentum", hp.bn_momentum);
                hp.bn_epsilon = h->value("bn_epsilon", hp.bn_epsilon);
            }
        }
        if (auto r = j.find("report"); r != j.end()) {
            if (auto s = r->find("conflict_set"); s != r->end() && !s->is_null()) {
                for (const auto& l : *s) c.conflict_set.insert(l.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    if (!(c.time.tau > 0.0) || !(c.time.sigma > 0.0)) throw InvalidArgument("riskpath.tau and sigma must be positive");
    if (!(c.metrics.theta > 0.0 && c.metrics.theta <= 1.0)) throw InvalidArgument("metrics.theta must be in (0, 1]");
    if (c.metrics.normalizer_px && !(*c.metrics.normalizer_px > 0.0)) {
        throw InvalidArgument("metrics.normalizer_px must be positive");
    }
    if (!(c.pif_hyper.dropout >= 0.0 && c.pif_hyper.dropout < 1.0)) throw InvalidArgument("pif.hyper.dropout must be in [0, 1)");
    return c;
}

ToolConfig load_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open config " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(0, std::string("config is not valid JSON: ") + e.what());
    }
    return load_config(j);
}

json config_to_json(const ToolConfig& c) {
    json j;
    j["paths"] = c.paths;
    j["embed"] = {{"provider", c.embed.provider},
                  {"model", c.embed.model},
                  {"endpoint", c.embed.endpoint},
                  {"timeout_ms", c.embed.timeout_ms},
                  {"cache_dir", c.embed.cache_dir ? json(*c.embed.cache_dir) : json(nullptr)}};
    j["riskpath"] = {{"tau", c.time.tau},
                     {"sigma", c.time.sigma},
                     {"alpha", c.errors.alpha},
                     {"min_error_rate", c.errors.min_error_rate}};
    j["metrics"] = {{"theta", c.metrics.theta},
                    {"pairwise_sid", c.metrics.pairwise_sid},
                    {"normalizer_px", c.metrics.normalizer_px ? json(*c.metrics.normalizer_px) : json(nullptr)}};
    const auto& h = c.pif_hyper;
    j["pif"] = {{"seed", c.pif_seed},
                {"folds", c.cv_folds},
                {"hyper",
                 {{"epochs", h.epochs},
                  {"learning_rate", h.learning_rate},
                  {"beta1", h.beta1},
                  {"beta2", h.beta2},
                  {"adam_epsilon", h.adam_epsilon},
                  {"dropout", h.dropout},
                  {"bn_momentum", h.bn_momentum},
                  {"bn_epsilon", h.bn_epsilon}}}};
    j["report"] = {{"conflict_set", c.conflict_set}};
    return j;
}

std::string config_fingerprint(const ToolConfig& config) {
    return to_hex(sha256(config_to_json(config).dump()));
}

} // namespace ierisk
