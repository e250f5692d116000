#pragma once

#include <map>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

namespace warpres {

/// Single-file model container.
///
/// Layout: "WRCK" magic, u32 container version, u64 manifest byte length,
/// UTF-8 JSON manifest, then the f32 blobs back to back in manifest order.
/// The manifest carries a mandatory "version" field, the architecture
/// section and a "blobs" table of {name, shape, offset}. Modules are stored
/// under dotted namespaces ("generator.", "e0.", "e1.", ...).
class Checkpoint {
public:
    static constexpr uint32_t kVersion = 1;

    nlohmann::json manifest = nlohmann::json::object();

    void put(const std::string& name, const torch::Tensor& t);
    const torch::Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return blobs_.count(name) != 0; }
    bool has_namespace(const std::string& prefix) const;

    /// Stores every parameter and buffer of `m` as "<prefix>.<name>".
    void put_module(const std::string& prefix, const torch::nn::Module& m);
    /// Copies "<prefix>.<name>" blobs into `m`; every parameter and buffer must
    /// be present with a matching shape.
    void load_module(const std::string& prefix, torch::nn::Module& m) const;

    /// Adam moments and step counters, keyed by parameter order.
    void put_adam(const std::string& prefix, torch::optim::Adam& opt);
    void load_adam(const std::string& prefix, torch::optim::Adam& opt) const;

    /// Copy every blob under `prefix` from another checkpoint.
    void merge_namespace(const Checkpoint& other, const std::string& prefix);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    std::map<std::string, torch::Tensor> blobs_;
};

/// FNV-1a digest of a module's parameters and buffers, as 16 hex digits.
std::string module_fingerprint(const torch::nn::Module& m);

} // namespace warpres
