#include "semdet/net/checkpoint.hpp"

#include "semdet/common/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace semdet::net {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'D', 'E', 'T', 'C', 'K'};

template <typename U>
void put(std::string& buf, U v)
{
    char bytes[sizeof(U)];
    std::memcpy(bytes, &v, sizeof(U));
    buf.append(bytes, sizeof(U));
}

std::uint32_t crc_of(const char* data, std::size_t n)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n));
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    Reader(const std::string& buf, std::size_t end, std::string path) : buf_(buf), end_(end), path_(std::move(path)) {}

    template <typename U>
    U get(const char* what)
    {
        need(sizeof(U), what);
        U v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(U));
        pos_ += sizeof(U);
        return v;
    }

    std::string bytes(std::size_t n, const char* what)
    {
        need(n, what);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n, const char* what)
    {
        if (n > end_ - pos_) {
            throw CorruptCheckpoint(path_ + ": truncated while reading " + what);
        }
    }

    const std::string& buf_;
    std::size_t end_;
    std::string path_;
    std::size_t pos_ = 0;
};

struct RawParameter {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct RawCheckpoint {
    CheckpointMeta meta;
    std::vector<RawParameter> params;
};

RawCheckpoint read_raw(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open checkpoint " + path.string());
    }
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CorruptCheckpoint(name + ": not a checkpoint (bad magic)");
    }
    if (buf.size() < sizeof(kMagic) + 4) {
        throw CorruptCheckpoint(name + ": truncated header");
    }
    std::uint32_t version;
    std::memcpy(&version, buf.data() + sizeof(kMagic), 4);
    if (version != kCheckpointVersion) {
        throw VersionMismatch(name + ": checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    if (buf.size() < sizeof(kMagic) + 8) {
        throw CorruptCheckpoint(name + ": truncated header");
    }
    const std::size_t body = buf.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, buf.data() + body, 4);
    if (crc_of(buf.data(), body) != stored) {
        throw CorruptCheckpoint(name + ": checksum mismatch");
    }

    Reader r(buf, body, name);
    r.bytes(sizeof(kMagic), "magic");
    r.get<std::uint32_t>("version");
    const auto meta_len = r.get<std::uint64_t>("metadata length");
    RawCheckpoint out;
    try {
        out.meta = checkpoint_meta_from_json(nlohmann::json::parse(r.bytes(meta_len, "metadata")));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(name + ": bad metadata: " + e.what());
    } catch (const ParseFailure& e) {
        throw CorruptCheckpoint(name + ": bad metadata: " + e.what());
    }
    const auto count = r.get<std::uint32_t>("parameter count");
    for (std::uint32_t i = 0; i < count; ++i) {
        RawParameter p;
        p.name = r.bytes(r.get<std::uint32_t>("name length"), "name");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > 8) {
            throw CorruptCheckpoint(name + ": implausible rank for " + p.name);
        }
        for (std::uint32_t d = 0; d < rank; ++d) {
            p.shape.push_back(static_cast<int>(r.get<std::uint32_t>("dims")));
        }
        const std::size_t n = Tensor<float>::count(p.shape);
        const std::string raw = r.bytes(n * sizeof(float), "values");
        p.values.resize(n);
        std::memcpy(p.values.data(), raw.data(), raw.size());
        out.params.push_back(std::move(p));
    }
    if (r.pos() != body) {
        throw CorruptCheckpoint(name + ": trailing bytes after parameters");
    }
    return out;
}

} // namespace

nlohmann::json to_json(const CheckpointMeta& meta)
{
    return {{"model", to_json(meta.model)},
            {"epoch", meta.epoch},
            {"dataset_id", meta.dataset_id},
            {"seed", meta.seed},
            {"input_mean", meta.input_mean},
            {"input_std", meta.input_std},
            {"extra", meta.extra}};
}

CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j)
{
    try {
        CheckpointMeta m;
        m.model = model_config_from_json(j.at("model"));
        m.epoch = j.at("epoch").get<int>();
        m.dataset_id = j.at("dataset_id").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.input_mean = j.at("input_mean").get<double>();
        m.input_std = j.at("input_std").get<double>();
        m.extra = j.value("extra", nlohmann::json::object());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("checkpoint metadata: ") + e.what());
    }
}

void save_checkpoint(const Network<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path)
{
    std::string buf(kMagic, sizeof(kMagic));
    put<std::uint32_t>(buf, kCheckpointVersion);
    CheckpointMeta m = meta;
    m.model = model.config();
    const std::string js = to_json(m).dump();
    put<std::uint64_t>(buf, js.size());
    buf += js;
    const auto& params = model.parameters();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
        buf += p.name;
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.shape().size()));
        for (int d : p.value.shape()) {
            put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
        }
        buf.append(reinterpret_cast<const char*>(p.value.ptr()), p.value.size() * sizeof(float));
    }
    put<std::uint32_t>(buf, crc_of(buf.data(), buf.size()));

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
            throw IoFailure("cannot write checkpoint " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoFailure("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
    }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path)
{
    RawCheckpoint raw = read_raw(path);
    Network<float> model(raw.meta.model);
    auto& params = model.parameters();
    if (raw.params.size() != params.size()) {
        throw CorruptCheckpoint(path.string() + ": " + std::to_string(raw.params.size()) +
                                " parameters stored, model config implies " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (raw.params[i].name != params[i].name || raw.params[i].shape != params[i].value.shape()) {
            throw CorruptCheckpoint(path.string() + ": parameter " + raw.params[i].name + " " +
                                    shape_string(raw.params[i].shape) + " does not fit " + params[i].name + " " +
                                    shape_string(params[i].value.shape()));
        }
        std::copy(raw.params[i].values.begin(), raw.params[i].values.end(), params[i].value.ptr());
    }
    return {std::move(model), std::move(raw.meta)};
}

Network<float> load_checkpoint_into(const std::filesystem::path& path, const ModelConfig& target,
                                    std::uint64_t init_seed, RemapReport* report, CheckpointMeta* meta)
{
    RawCheckpoint raw = read_raw(path);
    Network<float> model(target);
    model.initialize(init_seed);
    RemapReport rep;
    for (auto& p : model.parameters()) {
        bool copied = false;
        for (const auto& src : raw.params) {
            if (src.name == p.name && src.shape == p.value.shape()) {
                std::copy(src.values.begin(), src.values.end(), p.value.ptr());
                copied = true;
                break;
            }
        }
        (copied ? rep.copied : rep.reinitialized).push_back(p.name);
    }
    if (report) {
        *report = std::move(rep);
    }
    if (meta) {
        *meta = std::move(raw.meta);
    }
    return model;
}

} // namespace semdet::net
