#include "divgan/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace divgan {

using nlohmann::json;

json to_json(const NetworkSpec& spec)
{
    return json{{"input_dim", spec.input_dim},
                {"hidden_dims", spec.hidden_dims},
                {"output_dim", spec.output_dim},
                {"hidden_activation", to_string(spec.hidden_activation)},
                {"output_activation", to_string(spec.output_activation)},
                {"init_scale", spec.init_scale}};
}

NetworkSpec network_spec_from_json(const json& j)
{
    NetworkSpec s;
    j.at("input_dim").get_to(s.input_dim);
    j.at("hidden_dims").get_to(s.hidden_dims);
    j.at("output_dim").get_to(s.output_dim);
    s.hidden_activation = parse_hidden_activation(j.at("hidden_activation").get<std::string>());
    s.output_activation = parse_output_activation(j.at("output_activation").get<std::string>());
    j.at("init_scale").get_to(s.init_scale);
    s.validate();
    return s;
}

namespace {

json tensors_to_json(const std::vector<Tensor>& tensors)
{
    json arr = json::array();
    for (const Tensor& t : tensors) arr.push_back(json{{"shape", t.shape()}, {"values", t.to_vector()}});
    return arr;
}

std::vector<Tensor> tensors_from_json(const json& arr)
{
    std::vector<Tensor> out;
    for (const json& item : arr) out.emplace_back(item.at("shape").get<Shape>(), item.at("values").get<std::vector<double>>());
    return out;
}

json adam_to_json(const AdamState& s)
{
    return json{{"t", s.t}, {"m", tensors_to_json(s.m)}, {"v", tensors_to_json(s.v)}};
}

AdamState adam_from_json(const json& j)
{
    AdamState s;
    j.at("t").get_to(s.t);
    s.m = tensors_from_json(j.at("m"));
    s.v = tensors_from_json(j.at("v"));
    return s;
}

void check_adam(const AdamState& s, const NetworkParams& p, const char* who)
{
    if (s.m.size() != p.tensors.size() || s.v.size() != p.tensors.size()) {
        throw ShapeError(std::string(who) + ": Adam moments do not mirror the parameters");
    }
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        require_same_shape(s.m[i], p.tensors[i], who);
        require_same_shape(s.v[i], p.tensors[i], who);
    }
}

} // namespace

std::string save_checkpoint(const Checkpoint& ckpt)
{
    const TrainState& s = ckpt.state;
    const json doc{{"format", "divgan-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"spec_G", to_json(ckpt.spec_g)},
                   {"spec_D", to_json(ckpt.spec_d)},
                   {"params_G", tensors_to_json(s.g.tensors)},
                   {"params_D", tensors_to_json(s.d.tensors)},
                   {"adam_G", adam_to_json(s.adam_g)},
                   {"adam_D", adam_to_json(s.adam_d)},
                   {"step", s.step},
                   {"rng", s.rng.serialize()}};
    return doc.dump();
}

Checkpoint load_checkpoint(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON (truncated?): ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("version")) throw CheckpointError("checkpoint has no version field");
    const json& version = doc.at("version");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + version.dump() + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    try {
        Checkpoint c;
        c.spec_g = network_spec_from_json(doc.at("spec_G"));
        c.spec_d = network_spec_from_json(doc.at("spec_D"));
        c.state.g.tensors = tensors_from_json(doc.at("params_G"));
        c.state.d.tensors = tensors_from_json(doc.at("params_D"));
        c.state.adam_g = adam_from_json(doc.at("adam_G"));
        c.state.adam_d = adam_from_json(doc.at("adam_D"));
        doc.at("step").get_to(c.state.step);
        c.state.rng = Rng::restore(doc.at("rng").get<std::string>());
        c.state.g.check_against(c.spec_g);
        c.state.d.check_against(c.spec_d);
        check_adam(c.state.adam_g, c.state.g, "checkpoint generator");
        check_adam(c.state.adam_d, c.state.d, "checkpoint discriminator");
        return c;
    } catch (const CheckpointError&) {
        throw;
    } catch (const ShapeError& e) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint (version ") + std::to_string(kCheckpointVersion) +
                              "): " + e.what());
    }
}

Checkpoint load_checkpoint(const std::string& text, const NetworkSpec& expected_g, const NetworkSpec& expected_d)
{
    Checkpoint c = load_checkpoint(text);
    c.state.g.check_against(expected_g);
    c.state.d.check_against(expected_d);
    if (!(c.spec_g == expected_g) || !(c.spec_d == expected_d)) {
        throw ShapeError("checkpoint network specs differ from the expected ones");
    }
    return c;
}

Checkpoint read_checkpoint_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_checkpoint(buf.str());
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << save_checkpoint(ckpt);
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

} // namespace divgan
