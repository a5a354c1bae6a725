#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "peda/datagen.hpp"

namespace peda {

namespace fs = std::filesystem;
using Code = DatasetError::Code;

namespace {

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) {
            throw DatasetError(Code::Truncated, "dataset: truncated file (needed " + std::to_string(n) +
                                                    " bytes at offset " + std::to_string(pos_) + ")");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    Vec f32s(std::size_t n) {
        need(4 * n);
        Vec v(n);
        for (auto& x : v) x = f32();
        return v;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const char* at() const { return buf_.data() + pos_; }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

private:
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

bool looks_like_directory(const fs::path& p) {
    return fs::is_directory(p) || !p.has_extension();
}

nlohmann::json meta_to_json(const Dataset& ds) {
    nlohmann::json j;
    j["format_version"] = kDatasetVersion;
    j["env_id"] = ds.meta.env_id;
    j["env_params"] = nlohmann::json::parse(ds.meta.env_params_json.empty() ? "{}" : ds.meta.env_params_json);
    j["quality"] = ds.meta.quality;
    j["pref_dist"] = ds.meta.pref_dist;
    j["seed"] = ds.meta.seed;
    j["ensemble_size"] = ds.meta.ensemble_size;
    j["horizon"] = ds.meta.horizon;
    j["n_obj"] = ds.n_obj;
    j["state_dim"] = ds.state_dim;
    j["action_dim"] = ds.action_dim;
    j["n_traj"] = ds.trajectories.size();
    j["return_min"] = ds.stats.min;
    j["return_max"] = ds.stats.max;
    j["created"] = ds.meta.created;
    return j;
}

} // namespace

fs::path dataset_binary_path(const fs::path& path) {
    return looks_like_directory(path) ? path / kDatasetFile : path;
}

fs::path dataset_sidecar_path(const fs::path& path) {
    fs::path bin = dataset_binary_path(path);
    return bin.replace_extension(".meta.json");
}

void write_dataset(const Dataset& dataset, const fs::path& path) {
    try {
        dataset.validate();
    } catch (const DimensionError& e) {
        throw DatasetError(Code::DimensionMismatch, e.what());
    }
    Writer w;
    w.raw(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(dataset.n_obj));
    w.u32(static_cast<std::uint32_t>(dataset.state_dim));
    w.u32(static_cast<std::uint32_t>(dataset.action_dim));
    w.u64(dataset.trajectories.size());
    for (const auto& traj : dataset.trajectories) {
        w.u32(static_cast<std::uint32_t>(traj.steps.size()));
        for (double v : traj.preference.weights()) w.f32(v);
        for (const auto& step : traj.steps) {
            for (double v : step.state) w.f32(v);
            for (double v : step.action) w.f32(v);
            for (double v : step.reward) w.f32(v);
        }
    }

    const fs::path bin = dataset_binary_path(path);
    if (bin.has_parent_path()) fs::create_directories(bin.parent_path());
    {
        std::ofstream out(bin, std::ios::binary | std::ios::trunc);
        if (!out) throw DatasetError(Code::Io, "dataset: cannot open " + bin.string() + " for writing");
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw DatasetError(Code::Io, "dataset: write failed for " + bin.string());
    }
    std::ofstream meta(dataset_sidecar_path(path), std::ios::trunc);
    if (!meta) throw DatasetError(Code::Io, "dataset: cannot write sidecar");
    meta << meta_to_json(dataset).dump(2) << "\n";
}

Dataset read_dataset(const fs::path& path) {
    const fs::path bin = dataset_binary_path(path);
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw DatasetError(Code::Io, "dataset: cannot open " + bin.string());
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

    r.need(4);
    if (std::memcmp(r.at(), kDatasetMagic, 4) != 0) {
        throw DatasetError(Code::BadMagic, "dataset: bad magic in " + bin.string());
    }
    r.skip(4);
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw DatasetError(Code::BadVersion, "dataset: unsupported format version " + std::to_string(version));
    }
    Dataset ds;
    ds.n_obj = r.u32();
    ds.state_dim = r.u32();
    ds.action_dim = r.u32();
    const std::uint64_t n_traj = r.u64();
    if (ds.n_obj == 0 || ds.state_dim == 0 || ds.action_dim == 0) {
        throw DatasetError(Code::DimensionMismatch, "dataset: zero dimension in header");
    }
    const std::size_t record = 4 * (ds.state_dim + ds.action_dim + ds.n_obj);
    for (std::uint64_t k = 0; k < n_traj; ++k) {
        const std::uint32_t len = r.u32();
        if (len == 0) {
            throw DatasetError(Code::DimensionMismatch, "dataset: trajectory " + std::to_string(k) + " is empty");
        }
        Vec w = r.f32s(ds.n_obj);
        double sum = 0.0;
        bool ok = true;
        for (double v : w) {
            ok = ok && std::isfinite(v) && v >= 0.0;
            sum += v;
        }
        if (!ok || std::abs(sum - 1.0) > 1e-5) {
            throw DatasetError(Code::DimensionMismatch,
                               "dataset: trajectory " + std::to_string(k) +
                                   " preference is not on the simplex (record layout inconsistent with header)");
        }
        if (sum != 1.0) {
            for (double& v : w) v /= sum;
        }
        Trajectory traj;
        traj.preference = Preference(std::move(w));
        r.need(static_cast<std::size_t>(len) * record);
        traj.steps.resize(len);
        for (auto& step : traj.steps) {
            step.state = r.f32s(ds.state_dim);
            step.action = r.f32s(ds.action_dim);
            step.reward = r.f32s(ds.n_obj);
        }
        ds.trajectories.push_back(std::move(traj));
    }
    if (r.remaining() != 0) {
        throw DatasetError(Code::DimensionMismatch, "dataset: " + std::to_string(r.remaining()) +
                                                        " trailing bytes; records inconsistent with header dimensions");
    }
    if (ds.trajectories.empty()) {
        throw DatasetError(Code::DimensionMismatch, "dataset: no trajectories");
    }
    ds.stats = dataset_stats(ds);

    const fs::path sidecar = dataset_sidecar_path(path);
    if (fs::exists(sidecar)) {
        nlohmann::json j;
        try {
            std::ifstream ms(sidecar);
            j = nlohmann::json::parse(ms);
            ds.meta.env_id = j.value("env_id", "");
            ds.meta.env_params_json = j.contains("env_params") ? j["env_params"].dump() : "{}";
            ds.meta.quality = j.value("quality", "");
            ds.meta.pref_dist = j.value("pref_dist", "");
            ds.meta.seed = j.value("seed", std::uint64_t{0});
            ds.meta.ensemble_size = j.value("ensemble_size", std::size_t{0});
            ds.meta.horizon = j.value("horizon", std::size_t{0});
            ds.meta.created = j.value("created", "");
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(Code::BadSidecar, std::string("dataset: malformed sidecar: ") + e.what());
        }
        if (j.value("n_obj", ds.n_obj) != ds.n_obj || j.value("state_dim", ds.state_dim) != ds.state_dim ||
            j.value("action_dim", ds.action_dim) != ds.action_dim ||
            j.value("n_traj", ds.trajectories.size()) != ds.trajectories.size()) {
            throw DatasetError(Code::DimensionMismatch, "dataset: sidecar dimensions disagree with binary header");
        }
    }
    return ds;
}

} // namespace peda
