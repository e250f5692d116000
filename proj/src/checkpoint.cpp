#include "warpres/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "warpres/binary_io.hpp"
#include "warpres/errors.hpp"

namespace warpres {

namespace {

constexpr char kMagic[4] = {'W', 'R', 'C', 'K'};

std::string join(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

} // namespace

void Checkpoint::put(const std::string& name, const torch::Tensor& t) {
    blobs_[name] = t.detach().to(torch::kCPU, torch::kFloat32).contiguous().clone();
}

const torch::Tensor& Checkpoint::get(const std::string& name) const {
    auto it = blobs_.find(name);
    if (it == blobs_.end()) throw FormatError("checkpoint has no blob named '" + name + "'");
    return it->second;
}

bool Checkpoint::has_namespace(const std::string& prefix) const {
    const std::string p = prefix + ".";
    auto it = blobs_.lower_bound(p);
    return it != blobs_.end() && it->first.compare(0, p.size(), p) == 0;
}

void Checkpoint::put_module(const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& item : m.named_parameters(true)) put(join(prefix, item.key()), item.value());
    for (const auto& item : m.named_buffers(true)) put(join(prefix, item.key()), item.value());
}

void Checkpoint::load_module(const std::string& prefix, torch::nn::Module& m) const {
    torch::NoGradGuard no_grad;
    auto assign = [&](const std::string& name, torch::Tensor& dst) {
        const auto& src = get(join(prefix, name));
        if (src.sizes() != dst.sizes())
            throw ShapeError("checkpoint blob '" + join(prefix, name) + "' has shape " + c10::str(src.sizes()) +
                             ", module expects " + c10::str(dst.sizes()));
        dst.copy_(src.to(dst.dtype()));
    };
    for (auto& item : m.named_parameters(true)) assign(item.key(), item.value());
    for (auto& item : m.named_buffers(true)) assign(item.key(), item.value());
}

void Checkpoint::put_adam(const std::string& prefix, torch::optim::Adam& opt) {
    nlohmann::json steps = nlohmann::json::array();
    int64_t index = 0;
    for (auto& group : opt.param_groups()) {
        for (auto& p : group.params()) {
            auto it = opt.state().find(p.unsafeGetTensorImpl());
            if (it == opt.state().end()) {
                steps.push_back(0);
            } else {
                auto& st = static_cast<torch::optim::AdamParamState&>(*it->second);
                steps.push_back(st.step());
                put(join(prefix, std::to_string(index) + ".exp_avg"), st.exp_avg());
                put(join(prefix, std::to_string(index) + ".exp_avg_sq"), st.exp_avg_sq());
            }
            ++index;
        }
    }
    manifest["optimizers"][prefix] = {{"steps", steps}};
}

void Checkpoint::load_adam(const std::string& prefix, torch::optim::Adam& opt) const {
    if (!manifest.contains("optimizers") || !manifest["optimizers"].contains(prefix))
        throw FormatError("checkpoint has no optimizer state '" + prefix + "'");
    const auto& steps = manifest["optimizers"][prefix]["steps"];
    int64_t index = 0;
    opt.state().clear();
    for (auto& group : opt.param_groups()) {
        for (auto& p : group.params()) {
            const auto step = steps.at(static_cast<std::size_t>(index)).get<int64_t>();
            if (step > 0) {
                auto st = std::make_unique<torch::optim::AdamParamState>();
                st->step(step);
                st->exp_avg(get(join(prefix, std::to_string(index) + ".exp_avg")).to(p.dtype()).clone());
                st->exp_avg_sq(get(join(prefix, std::to_string(index) + ".exp_avg_sq")).to(p.dtype()).clone());
                opt.state()[p.unsafeGetTensorImpl()] = std::move(st);
            }
            ++index;
        }
    }
}

void Checkpoint::merge_namespace(const Checkpoint& other, const std::string& prefix) {
    const std::string p = prefix + ".";
    for (auto it = other.blobs_.lower_bound(p); it != other.blobs_.end() && it->first.compare(0, p.size(), p) == 0;
         ++it)
        blobs_[it->first] = it->second;
}

void Checkpoint::save(const std::string& path) const {
    nlohmann::json m = manifest;
    m["version"] = kVersion;
    nlohmann::json table = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : blobs_) {
        table.push_back({{"name", name}, {"shape", t.sizes().vec()}, {"offset", offset}});
        offset += static_cast<uint64_t>(t.numel()) * 4;
    }
    m["blobs"] = table;
    const std::string text = m.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + path);
        out.write(kMagic, 4);
        bin::write<uint32_t>(out, kVersion);
        bin::write<uint64_t>(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, t] : blobs_)
            out.write(reinterpret_cast<const char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * 4));
        if (!out) throw IoError("failed writing checkpoint " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place at " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[4];
    bin::read_bytes(in, magic, 4, "checkpoint magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint file: " + path);
    const auto version = bin::read<uint32_t>(in, "checkpoint version");
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto len = bin::read<uint64_t>(in, "manifest length");
    std::string text(len, '\0');
    bin::read_bytes(in, text.data(), len, "manifest");

    Checkpoint ck;
    try {
        ck.manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("corrupt checkpoint manifest: " + std::string(e.what()));
    }
    if (!ck.manifest.contains("version")) throw FormatError("checkpoint manifest lacks a version field");
    for (const auto& entry : ck.manifest.at("blobs")) {
        auto shape = entry.at("shape").get<std::vector<int64_t>>();
        auto t = torch::empty(shape, torch::kFloat32);
        bin::read_bytes(in, t.data_ptr<float>(), static_cast<std::size_t>(t.numel()) * 4, "checkpoint blob");
        ck.blobs_[entry.at("name").get<std::string>()] = t;
    }
    ck.manifest.erase("blobs");
    return ck;
}

std::string module_fingerprint(const torch::nn::Module& m) {
    uint64_t h = 1469598103934665603ULL;
    auto feed = [&](const torch::Tensor& t) {
        auto c = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
        const auto* bytes = reinterpret_cast<const unsigned char*>(c.data_ptr<float>());
        for (int64_t i = 0; i < c.numel() * 4; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& p : m.parameters(true)) feed(p);
    for (const auto& b : m.buffers(true)) feed(b);
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace warpres
