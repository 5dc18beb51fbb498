#include "divgan/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace divgan {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys{
    "task",       "z_dim",       "batch_size", "steps",          "seed",        "lambda",
    "tau",        "norm",        "space",      "beta",           "g_loss_form", "lr",
    "beta1",      "beta2",       "eps",        "eval_every",     "eval_samples", "log_every",
    "d_steps_per_g", "min_z_gap", "warm_start_discriminator",    "warm_start_freeze_steps",
    "ring",       "conditional", "trajectory", "generator",      "discriminator"};

const std::map<std::string, std::set<std::string>> kNestedKeys{
    {"ring", {"n_modes", "radius", "std"}},
    {"conditional", {"n_labels"}},
    {"trajectory", {"context_len", "horizon", "radius", "angular_step", "noise_std"}},
    {"generator", {"hidden_dims", "hidden_activation", "output_activation", "init_scale"}},
    {"discriminator", {"hidden_dims", "hidden_activation", "output_activation", "init_scale"}},
};

std::vector<std::string> unknown_keys(const json& doc)
{
    std::vector<std::string> unknown;
    for (const auto& [key, value] : doc.items()) {
        if (!kTopKeys.contains(key)) {
            unknown.push_back(key);
            continue;
        }
        const auto nested = kNestedKeys.find(key);
        if (nested == kNestedKeys.end()) continue;
        if (!value.is_object()) continue;
        for (const auto& [sub, unused] : value.items()) {
            if (!nested->second.contains(sub)) unknown.push_back(key + "." + sub);
        }
    }
    return unknown;
}

template <typename T>
void read(const json& obj, const std::string& key, const std::string& path, T& out)
{
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + path + "' has the wrong type: " + e.what(), {path});
    }
}

template <typename Enum, typename Parse>
void read_enum(const json& obj, const std::string& key, const std::string& path, Enum& out, Parse parse)
{
    if (!obj.contains(key)) return;
    std::string s;
    read(obj, key, path, s);
    try {
        out = parse(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config key '" + path + "': " + e.what(), {path});
    }
}

void read_network(const json& doc, const std::string& key, NetworkSpec& spec)
{
    if (!doc.contains(key)) return;
    const json& n = doc.at(key);
    if (!n.is_object()) throw ConfigError("config key '" + key + "' must be an object", {key});
    read(n, "hidden_dims", key + ".hidden_dims", spec.hidden_dims);
    read_enum(n, "hidden_activation", key + ".hidden_activation", spec.hidden_activation, parse_hidden_activation);
    read_enum(n, "output_activation", key + ".output_activation", spec.output_activation, parse_output_activation);
    read(n, "init_scale", key + ".init_scale", spec.init_scale);
}

const json& section(const json& doc, const std::string& key)
{
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    if (!doc.at(key).is_object()) throw ConfigError("config key '" + key + "' must be an object", {key});
    return doc.at(key);
}

} // namespace

TrainConfig config_from_json(const json& doc)
{
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    const auto unknown = unknown_keys(doc);
    if (!unknown.empty()) {
        std::string list;
        for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + ("'" + k + "'");
        throw ConfigError("unknown config keys: " + list, unknown);
    }

    Task task = Task::ring;
    read_enum(doc, "task", "task", task, parse_task);
    TrainConfig cfg = default_config(task);

    read(doc, "z_dim", "z_dim", cfg.z_dim);
    read(doc, "batch_size", "batch_size", cfg.batch_size);
    read(doc, "steps", "steps", cfg.steps);
    read(doc, "seed", "seed", cfg.seed);
    read(doc, "eval_every", "eval_every", cfg.eval_every);
    read(doc, "eval_samples", "eval_samples", cfg.eval_samples);
    read(doc, "log_every", "log_every", cfg.log_every);
    read(doc, "d_steps_per_g", "d_steps_per_g", cfg.d_steps_per_g);
    read(doc, "lr", "lr", cfg.adam.lr);
    read(doc, "beta1", "beta1", cfg.adam.beta1);
    read(doc, "beta2", "beta2", cfg.adam.beta2);
    read(doc, "eps", "eps", cfg.adam.eps);
    read(doc, "beta", "beta", cfg.objective.beta);
    read_enum(doc, "g_loss_form", "g_loss_form", cfg.objective.g_loss_form, parse_g_loss_form);

    DiversityConfig& div = cfg.objective.diversity;
    read(doc, "lambda", "lambda", div.lambda);
    read_enum(doc, "norm", "norm", div.norm, parse_norm);
    read_enum(doc, "space", "space", div.space, parse_space);
    read(doc, "min_z_gap", "min_z_gap", div.min_z_gap);

    const json& ring = section(doc, "ring");
    read(ring, "n_modes", "ring.n_modes", cfg.ring.n_modes);
    read(ring, "radius", "ring.radius", cfg.ring.radius);
    read(ring, "std", "ring.std", cfg.ring.std);
    cfg.conditional.base = cfg.ring;
    read(section(doc, "conditional"), "n_labels", "conditional.n_labels", cfg.conditional.n_labels);
    const json& traj = section(doc, "trajectory");
    read(traj, "context_len", "trajectory.context_len", cfg.trajectory.context_len);
    read(traj, "horizon", "trajectory.horizon", cfg.trajectory.horizon);
    read(traj, "radius", "trajectory.radius", cfg.trajectory.radius);
    read(traj, "angular_step", "trajectory.angular_step", cfg.trajectory.angular_step);
    read(traj, "noise_std", "trajectory.noise_std", cfg.trajectory.noise_std);
    div.sequence_length = cfg.task == Task::trajectory ? cfg.trajectory.horizon : 1;

    read_network(doc, "generator", cfg.generator_arch);
    read_network(doc, "discriminator", cfg.discriminator_arch);

    // tau: number, or null / "none" for no clamp; absent means the default
    // for the generator's output activation.
    div.tau = default_tau(cfg.generator_spec());
    if (doc.contains("tau")) {
        const json& t = doc.at("tau");
        if (t.is_null() || (t.is_string() && t.get<std::string>() == "none")) {
            div.tau = std::nullopt;
        } else if (t.is_number()) {
            div.tau = t.get<double>();
        } else {
            throw ConfigError("config key 'tau' must be a number, null or \"none\"", {"tau"});
        }
    }

    if (doc.contains("warm_start_discriminator") && !doc.at("warm_start_discriminator").is_null()) {
        std::string path;
        read(doc, "warm_start_discriminator", "warm_start_discriminator", path);
        cfg.warm_start_discriminator = path;
    }
    read(doc, "warm_start_freeze_steps", "warm_start_freeze_steps", cfg.warm_start_freeze_steps);

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

TrainConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(doc);
}

TrainConfig read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

json config_to_json(const TrainConfig& cfg)
{
    const DiversityConfig& div = cfg.objective.diversity;
    auto network = [](const NetworkSpec& s) {
        return json{{"hidden_dims", s.hidden_dims},
                    {"hidden_activation", to_string(s.hidden_activation)},
                    {"output_activation", to_string(s.output_activation)},
                    {"init_scale", s.init_scale}};
    };
    json doc{{"task", to_string(cfg.task)},
             {"z_dim", cfg.z_dim},
             {"batch_size", cfg.batch_size},
             {"steps", cfg.steps},
             {"seed", cfg.seed},
             {"lambda", div.lambda},
             {"tau", div.tau ? json(*div.tau) : json(nullptr)},
             {"norm", to_string(div.norm)},
             {"space", to_string(div.space)},
             {"min_z_gap", div.min_z_gap},
             {"beta", cfg.objective.beta},
             {"g_loss_form", to_string(cfg.objective.g_loss_form)},
             {"lr", cfg.adam.lr},
             {"beta1", cfg.adam.beta1},
             {"beta2", cfg.adam.beta2},
             {"eps", cfg.adam.eps},
             {"eval_every", cfg.eval_every},
             {"eval_samples", cfg.eval_samples},
             {"log_every", cfg.log_every},
             {"d_steps_per_g", cfg.d_steps_per_g},
             {"ring", {{"n_modes", cfg.ring.n_modes}, {"radius", cfg.ring.radius}, {"std", cfg.ring.std}}},
             {"conditional", {{"n_labels", cfg.conditional.n_labels}}},
             {"trajectory", {{"context_len", cfg.trajectory.context_len},
                             {"horizon", cfg.trajectory.horizon},
                             {"radius", cfg.trajectory.radius},
                             {"angular_step", cfg.trajectory.angular_step},
                             {"noise_std", cfg.trajectory.noise_std}}},
             {"generator", network(cfg.generator_arch)},
             {"discriminator", network(cfg.discriminator_arch)},
             {"warm_start_freeze_steps", cfg.warm_start_freeze_steps}};
    doc["warm_start_discriminator"] = cfg.warm_start_discriminator ? json(*cfg.warm_start_discriminator) : json(nullptr);
    return doc;
}

} // namespace divgan
