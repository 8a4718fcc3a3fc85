#include "collapse/models.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace collapse {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

const char* activation_name(ActivationKind k) {
    switch (k) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::Identity: return "identity";
    }
    return "identity";
}

ActivationKind activation_from(const std::string& s) {
    if (s == "relu") return ActivationKind::ReLU;
    if (s == "leaky_relu") return ActivationKind::LeakyReLU;
    if (s == "identity") return ActivationKind::Identity;
    throw IoError("checkpoint: unknown activation '" + s + "'");
}

json describe(const MlpParams& p) {
    json acts = json::array();
    for (const auto& a : p.activations) acts.push_back({{"kind", activation_name(a.kind)}, {"slope", a.slope}});
    return {{"layer_dims", p.layer_dims}, {"activations", acts}};
}

void put_doubles(std::string& out, std::span<const double> v) {
    const std::size_t at = out.size();
    out.resize(at + v.size() * sizeof(double));
    std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
}

void put_mlp(std::string& out, const MlpParams& p) {
    for (std::size_t i = 0; i < p.layer_count(); ++i) {
        put_doubles(out, p.weights[i].values());
        put_doubles(out, p.biases[i]);
    }
}

struct Reader {
    const std::string& bytes;
    std::size_t pos = 0;

    void take(void* dst, std::size_t n) {
        if (pos + n > bytes.size()) throw IoError("checkpoint: truncated file");
        std::memcpy(dst, bytes.data() + pos, n);
        pos += n;
    }
    void doubles(std::span<double> dst) { take(dst.data(), dst.size() * sizeof(double)); }
};

MlpParams read_mlp(Reader& r, const json& desc) {
    std::vector<Activation> acts;
    for (const auto& a : desc.at("activations"))
        acts.push_back({activation_from(a.at("kind").get<std::string>()), a.at("slope").get<double>()});
    MlpParams p = MlpParams::zeros(desc.at("layer_dims").get<std::vector<std::size_t>>(), std::move(acts));
    for (std::size_t i = 0; i < p.layer_count(); ++i) {
        r.doubles(p.weights[i].values());
        r.doubles(p.biases[i]);
    }
    return p;
}

} // namespace

std::string serialize_wgan_state(const WganState& state, const std::string& config_json) {
    json header;
    header["config"] = config_json.empty() ? json::object() : json::parse(config_json);
    header["generator"] = describe(state.generator.net);
    header["generator"]["z_dim"] = state.generator.z_dim;
    header["generator"]["trained_steps"] = state.generator.trained_steps;
    if (state.generator.class_embedding)
        header["generator"]["class_embedding"] = {state.generator.class_embedding->rows(),
                                                  state.generator.class_embedding->cols()};
    header["critic"] = describe(state.critic.net);
    header["critic"]["trained_steps"] = state.critic.trained_steps;
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.append(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    out += text;
    put_mlp(out, state.generator.net);
    if (state.generator.class_embedding) put_doubles(out, state.generator.class_embedding->values());
    put_mlp(out, state.critic.net);
    return out;
}

WganState deserialize_wgan_state(const std::string& bytes, std::string* config_json) {
    Reader r{bytes};
    char magic[sizeof kMagic];
    r.take(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError("checkpoint: bad magic");
    std::uint32_t version = 0;
    r.take(&version, sizeof version);
    if (version != kVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    std::uint64_t len = 0;
    r.take(&len, sizeof len);
    if (r.pos + len > bytes.size()) throw IoError("checkpoint: truncated header");
    json header;
    try {
        header = json::parse(bytes.substr(r.pos, len));
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: bad header: ") + e.what());
    }
    r.pos += len;

    WganState s;
    try {
        const json& g = header.at("generator");
        s.generator.net = read_mlp(r, g);
        s.generator.z_dim = g.at("z_dim").get<std::size_t>();
        s.generator.trained_steps = g.at("trained_steps").get<std::size_t>();
        if (g.contains("class_embedding")) {
            const auto shape = g.at("class_embedding").get<std::vector<std::size_t>>();
            Matrix table(shape.at(0), shape.at(1));
            r.doubles(table.values());
            s.generator.class_embedding = std::move(table);
        }
        const json& c = header.at("critic");
        s.critic.net = read_mlp(r, c);
        s.critic.trained_steps = c.at("trained_steps").get<std::size_t>();
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: malformed header: ") + e.what());
    }
    if (r.pos != bytes.size()) throw IoError("checkpoint: trailing bytes");
    if (config_json) *config_json = header.at("config").dump();
    return s;
}

void save_wgan_checkpoint(const std::string& path, const WganState& state, const std::string& config_json) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    const std::string bytes = serialize_wgan_state(state, config_json);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

WganState load_wgan_checkpoint(const std::string& path, std::string* config_json) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_wgan_state(ss.str(), config_json);
}

} // namespace collapse
