#include "autotcl/config.hpp"

#include "autotcl/errors.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace autotcl {

Variant parse_variant(const std::string& name) {
    static const std::pair<const char*, Variant> table[] = {
        {"autotcl", Variant::autotcl}, {"wo_h", Variant::wo_h},       {"wo_g", Variant::wo_g},
        {"wo_dv", Variant::wo_dv},     {"wo_aug", Variant::wo_aug},   {"cutout", Variant::cutout},
        {"jitter", Variant::jitter},   {"random_aug", Variant::random_aug}, {"adversarial", Variant::adversarial},
    };
    for (const auto& [n, v] : table)
        if (name == n) return v;
    throw ConfigError("variant", "unknown variant '" + name + "'");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::autotcl: return "autotcl";
        case Variant::wo_h: return "wo_h";
        case Variant::wo_g: return "wo_g";
        case Variant::wo_dv: return "wo_dv";
        case Variant::wo_aug: return "wo_aug";
        case Variant::cutout: return "cutout";
        case Variant::jitter: return "jitter";
        case Variant::random_aug: return "random_aug";
        case Variant::adversarial: return "adversarial";
    }
    return "?";
}

bool uses_augmentation_network(Variant v) {
    return v == Variant::autotcl || v == Variant::wo_h || v == Variant::wo_g || v == Variant::wo_dv ||
           v == Variant::adversarial;
}

bool uses_static_augmentation(Variant v) {
    return v == Variant::cutout || v == Variant::jitter || v == Variant::random_aug;
}

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

}  // namespace

void ExperimentConfig::validate() const {
    require(encoder.depth >= 1, "encoder.depth", "must be >= 1");
    require(encoder.hidden_dim >= 1, "encoder.hidden_dim", "must be >= 1");
    require(encoder.repr_dim >= 1, "encoder.repr_dim", "must be >= 1");
    require(encoder.dropout >= 0.0 && encoder.dropout < 1.0, "encoder.dropout", "must lie in [0, 1)");
    require(encoder.mask_prob >= 0.0 && encoder.mask_prob <= 1.0, "encoder.mask_prob", "must lie in [0, 1]");
    require(aug.depth >= 1, "aug.depth", "must be >= 1");
    require(aug.hidden_dim >= 1, "aug.hidden_dim", "must be >= 1");
    require(aug.concrete.tau > 0.0, "aug.tau", "must be > 0");
    require(aug.concrete.gamma < 0.0, "aug.gamma", "must be < 0");
    require(aug.concrete.zeta > 1.0, "aug.zeta", "must be > 1");
    require(aug.g_floor > 0.0 && aug.g_floor < 1.0, "aug.g_floor", "must lie in (0, 1)");
    require(beta >= 0.0, "beta", "must be >= 0");
    require(lambda >= 0.0, "lambda", "must be >= 0");
    require(alpha >= 0.0, "alpha", "must be >= 0");
    require(M >= 1, "M", "must be >= 1");
    require(epochs >= 0, "epochs", "must be >= 0");
    require(batch_size >= 1, "batch_size", "must be >= 1");
    require(lr_encoder > 0.0, "lr_encoder", "must be > 0");
    require(lr_aug >= 0.0, "lr_aug", "must be >= 0");
    require(T >= 0, "T", "must be >= 0");
    require(L >= 1, "L", "must be >= 1");
    require(T == 0 || T >= 3 * L || alpha == 0.0, "L", "local contrast needs T >= 3L");
    require(temperature > 0.0, "temperature", "must be > 0");
    require(window_stride >= 1, "window_stride", "must be >= 1");
    require(eval_window >= 0, "eval_window", "must be >= 0");
    require(checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
    require(data.setting == "univariate" || data.setting == "multivariate", "data.setting",
            "must be 'univariate' or 'multivariate'");
    require(data.format == "ett_csv" || data.format == "generic_csv" || data.format == "uea_archive", "data.format",
            "must be one of ett_csv, generic_csv, uea_archive");
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["encoder"] = {{"depth", c.encoder.depth},
                    {"hidden_dim", c.encoder.hidden_dim},
                    {"repr_dim", c.encoder.repr_dim},
                    {"dropout", c.encoder.dropout},
                    {"mask_prob", c.encoder.mask_prob}};
    j["aug"] = {{"depth", c.aug.depth},
                {"hidden_dim", c.aug.hidden_dim},
                {"tau", c.aug.concrete.tau},
                {"gamma", c.aug.concrete.gamma},
                {"zeta", c.aug.concrete.zeta},
                {"g_floor", c.aug.g_floor}};
    j["data"] = {{"path", c.data.path}, {"format", c.data.format}, {"setting", c.data.setting}};
    j["beta"] = c.beta;
    j["lambda"] = c.lambda;
    j["alpha"] = c.alpha;
    j["M"] = c.M;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr_encoder"] = c.lr_encoder;
    j["lr_aug"] = c.lr_aug;
    j["seed"] = c.seed;
    j["T"] = c.T;
    j["L"] = c.L;
    j["temperature"] = c.temperature;
    j["window_stride"] = c.window_stride;
    j["eval_window"] = c.eval_window;
    j["checkpoint_every"] = c.checkpoint_every;
    j["variant"] = to_string(c.variant);
    j["static_param"] = c.static_param;
    return j;
}

namespace {

class Reader {
public:
    Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) throw ConfigError(prefix_, "expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        const std::string path = prefix_.empty() ? key : prefix_ + "." + key;
        if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) throw ConfigError(path, "expected a string");
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) throw ConfigError(path, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (it->is_number_integer() && !it->is_number_unsigned() && it->template get<long long>() < 0)
                    throw ConfigError(path, "expected a non-negative integer");
            }
        } else {
            if (!it->is_number()) throw ConfigError(path, "expected a number");
        }
        out = it->template get<T>();
    }

    Reader child(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        static const json empty = json::object();
        return Reader(it == obj_.end() ? empty : *it, prefix_.empty() ? key : prefix_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k)) throw ConfigError(prefix_.empty() ? k : prefix_ + "." + k, "unknown configuration key");
    }

private:
    const json& obj_;
    std::string prefix_;
    std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    Reader root(j, "");
    {
        Reader e = root.child("encoder");
        e.get("depth", c.encoder.depth);
        e.get("hidden_dim", c.encoder.hidden_dim);
        e.get("repr_dim", c.encoder.repr_dim);
        e.get("dropout", c.encoder.dropout);
        e.get("mask_prob", c.encoder.mask_prob);
        e.finish();
    }
    {
        Reader a = root.child("aug");
        a.get("depth", c.aug.depth);
        a.get("hidden_dim", c.aug.hidden_dim);
        a.get("tau", c.aug.concrete.tau);
        a.get("gamma", c.aug.concrete.gamma);
        a.get("zeta", c.aug.concrete.zeta);
        a.get("g_floor", c.aug.g_floor);
        a.finish();
    }
    {
        Reader d = root.child("data");
        d.get("path", c.data.path);
        d.get("format", c.data.format);
        d.get("setting", c.data.setting);
        d.finish();
    }
    root.get("beta", c.beta);
    root.get("lambda", c.lambda);
    root.get("alpha", c.alpha);
    root.get("M", c.M);
    root.get("epochs", c.epochs);
    root.get("batch_size", c.batch_size);
    root.get("lr_encoder", c.lr_encoder);
    root.get("lr_aug", c.lr_aug);
    root.get("seed", c.seed);
    root.get("T", c.T);
    root.get("L", c.L);
    root.get("temperature", c.temperature);
    root.get("window_stride", c.window_stride);
    root.get("eval_window", c.eval_window);
    root.get("checkpoint_every", c.checkpoint_every);
    std::string variant = to_string(c.variant);
    root.get("variant", variant);
    c.variant = parse_variant(variant);
    root.get("static_param", c.static_param);
    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::string canonical_config_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string sha1_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha1(), nullptr);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string body = canonical_config_text(cfg);
    std::string blob = "blob " + std::to_string(body.size());
    blob.push_back('\0');
    blob += body;
    return sha1_hex(blob);
}

}  // namespace autotcl
