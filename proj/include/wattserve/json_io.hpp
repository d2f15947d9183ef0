#ifndef WATTSERVE_JSON_IO_HPP
#define WATTSERVE_JSON_IO_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wattserve/csvio.hpp"
#include "wattserve/types.hpp"

namespace wattserve {

using json = nlohmann::json;

inline json gpu_to_json(const GpuSpec& g) {
    return json{{"idle_watts", g.idle_watts},
                {"min_cap_watts", g.min_cap_watts},
                {"max_cap_watts", g.max_cap_watts},
                {"max_frequency", g.max_frequency}};
}

inline GpuSpec gpu_from_json(const json& j) {
    GpuSpec g;
    g.idle_watts = j.at("idle_watts").get<double>();
    g.min_cap_watts = j.at("min_cap_watts").get<double>();
    g.max_cap_watts = j.at("max_cap_watts").get<double>();
    g.max_frequency = j.at("max_frequency").get<double>();
    g.validate();
    return g;
}

inline json coeffs_to_json(const SystemPowerCoeffs& k) {
    return json{{"alpha", k.alpha}, {"beta_watts", k.beta_watts}};
}

inline SystemPowerCoeffs coeffs_from_json(const json& j) {
    SystemPowerCoeffs k;
    k.alpha = j.at("alpha").get<double>();
    k.beta_watts = j.at("beta_watts").get<double>();
    k.validate();
    return k;
}

inline json profile_to_json(const ModelProfile& p) {
    json comm = json::object();
    for (const auto& [tp, v] : p.comm_fixed_by_tp) comm[std::to_string(tp)] = v;
    return json{{"schema_version", 1},
                {"name", p.name},
                {"total_params_b", p.total_params_b},
                {"active_params_b", p.active_params_b},
                {"num_experts", p.num_experts},
                {"top_k", p.top_k},
                {"compute_fixed", p.compute_fixed},
                {"compute_per_seq", p.compute_per_seq},
                {"comm_fixed_by_tp", comm},
                {"comm_per_seq", p.comm_per_seq},
                {"internode_factor", p.internode_factor},
                {"knee_watts", p.knee_watts},
                {"compute_power_base", p.compute_power_base},
                {"compute_power_per_seq", p.compute_power_per_seq},
                {"comm_power", p.comm_power},
                {"overlap", p.overlap},
                {"deployment",
                 json{{"tp", p.deployment.tp}, {"ep", p.deployment.ep}, {"dp", p.deployment.dp}}}};
}

inline ModelProfile profile_from_json(const json& j) {
    ModelProfile p;
    p.name = j.at("name").get<std::string>();
    p.total_params_b = j.at("total_params_b").get<double>();
    p.active_params_b = j.at("active_params_b").get<double>();
    p.num_experts = j.at("num_experts").get<int>();
    p.top_k = j.at("top_k").get<int>();
    p.compute_fixed = j.at("compute_fixed").get<double>();
    p.compute_per_seq = j.at("compute_per_seq").get<double>();
    for (const auto& [k, v] : j.at("comm_fixed_by_tp").items())
        p.comm_fixed_by_tp[std::stoi(k)] = v.get<double>();
    p.comm_per_seq = j.at("comm_per_seq").get<double>();
    p.internode_factor = j.at("internode_factor").get<double>();
    p.knee_watts = j.at("knee_watts").get<double>();
    p.compute_power_base = j.at("compute_power_base").get<double>();
    p.compute_power_per_seq = j.at("compute_power_per_seq").get<double>();
    p.comm_power = j.at("comm_power").get<double>();
    p.overlap = j.at("overlap").get<double>();
    if (j.contains("deployment")) {
        const auto& d = j.at("deployment");
        p.deployment.tp = d.at("tp").get<int>();
        p.deployment.ep = d.at("ep").get<int>();
        p.deployment.dp = d.at("dp").get<int>();
    }
    return p;
}

// Platform file: GPU spec plus host power coefficients.
struct Platform {
    GpuSpec gpu;
    SystemPowerCoeffs coeffs;
};

inline Platform platform_from_json(const json& j) {
    return Platform{gpu_from_json(j.at("gpu")), coeffs_from_json(j.at("system_power"))};
}

inline json platform_to_json(const Platform& p) {
    return json{{"gpu", gpu_to_json(p.gpu)}, {"system_power", coeffs_to_json(p.coeffs)}};
}

class ProfileRegistry {
public:
    void add(ModelProfile p) { profiles_[p.name] = std::move(p); }

    const ModelProfile& get(const std::string& name) const {
        auto it = profiles_.find(name);
        if (it == profiles_.end()) throw config_error("unknown model profile: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return profiles_.count(name) > 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, _] : profiles_) out.push_back(k);
        return out;
    }

    std::size_t size() const { return profiles_.size(); }

    static ProfileRegistry load_dir(const std::filesystem::path& dir, const GpuSpec& gpu) {
        ProfileRegistry reg;
        if (!std::filesystem::is_directory(dir))
            throw data_error("profile directory not found: " + dir.string());
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.path().extension() == ".json" && e.path().filename() != "platform.json")
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            ModelProfile p = profile_from_json(json::parse(read_text_file(f)));
            p.validate(gpu);
            reg.add(std::move(p));
        }
        return reg;
    }

private:
    std::map<std::string, ModelProfile> profiles_;
};

inline json parse_json_file(const std::filesystem::path& path) {
    return json::parse(read_text_file(path));
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace wattserve

#endif
