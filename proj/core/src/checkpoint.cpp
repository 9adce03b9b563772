#include "tbs/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace tbs {

namespace {

constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;

class Crc {
public:
    void update(const unsigned char* data, std::size_t n) {
        crc_ = crc32(crc_, data, static_cast<uInt>(n));
    }
    std::uint32_t value() const { return static_cast<std::uint32_t>(crc_); }

private:
    uLong crc_ = crc32(0L, Z_NULL, 0);
};

}  // namespace

void write_checkpoint(std::ostream& os, const std::vector<CheckpointEntry>& entries) {
    using detail::put_le;
    os.write("TBSC", 4);
    put_le<std::uint32_t>(os, kCheckpointVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    Crc crc;
    for (const auto& e : entries) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
        for (auto extent : e.value.shape()) put_le<std::uint64_t>(os, extent);
        std::string payload;
        payload.reserve(e.value.size() * 4);
        for (float v : e.value.span()) {
            const auto bits = std::bit_cast<std::uint32_t>(v);
            for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        }
        crc.update(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
        os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    put_le<std::uint32_t>(os, crc.value());
    if (!os) throw CheckpointError("failed writing checkpoint");
}

std::vector<CheckpointEntry> read_checkpoint(std::istream& is) {
    using detail::get_le;
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "TBSC", 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
    const auto version = get_le<std::uint32_t, CheckpointError>(is, "version");
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto count = get_le<std::uint32_t, CheckpointError>(is, "entry count");
    std::vector<CheckpointEntry> entries;
    Crc crc;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = get_le<std::uint32_t, CheckpointError>(is, "name length");
        if (len == 0 || len > kMaxNameLength) throw CheckpointError("implausible entry name length");
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw CheckpointError("truncated input reading entry name");
        const auto rank = get_le<std::uint32_t, CheckpointError>(is, "rank");
        if (rank == 0 || rank > kMaxRank) throw CheckpointError("implausible rank for " + name);
        Shape shape;
        std::uint64_t numel = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            const auto extent = get_le<std::uint64_t, CheckpointError>(is, "extent");
            if (extent == 0 || extent > (1ULL << 28)) throw CheckpointError("implausible extent for " + name);
            numel *= extent;
            if (numel > (1ULL << 28)) throw CheckpointError("implausible size for " + name);
            shape.push_back(static_cast<std::size_t>(extent));
        }
        std::string payload(numel * 4, '\0');
        if (!is.read(payload.data(), static_cast<std::streamsize>(payload.size())))
            throw CheckpointError("truncated payload for " + name);
        crc.update(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
        std::vector<float> values(numel);
        for (std::size_t i = 0; i < numel; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i * 4 + b])) << (8 * b);
            values[i] = std::bit_cast<float>(bits);
        }
        entries.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(values))});
    }
    const auto stored = get_le<std::uint32_t, CheckpointError>(is, "CRC");
    if (stored != crc.value()) throw CheckpointError("checkpoint CRC mismatch (file is corrupted)");
    return entries;
}

std::vector<CheckpointEntry> model_entries(const ModelParams<float>& params) {
    std::vector<CheckpointEntry> out;
    params.for_each([&out](const std::string& name, const Tensor<float>& t) { out.push_back({name, t}); });
    return out;
}

ModelParams<float> model_from_entries(const std::vector<CheckpointEntry>& entries) {
    ModelParams<float> p = ModelParams<float>::init(0);
    std::size_t k = 0;
    p.for_each([&](const std::string& name, Tensor<float>& t) {
        if (k >= entries.size()) throw CheckpointError("checkpoint is missing entry " + name);
        const auto& e = entries[k++];
        if (e.name != name) throw CheckpointError("checkpoint entry '" + e.name + "' where '" + name + "' expected");
        if (e.value.shape() != t.shape())
            throw CheckpointError("checkpoint entry " + name + " has shape " + shape_str(e.value.shape()) +
                                  ", expected " + shape_str(t.shape()));
        t = e.value;
    });
    if (k != entries.size()) throw CheckpointError("checkpoint has unexpected extra entries");
    return p;
}

void save_model(const std::filesystem::path& path, const ModelParams<float>& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + path.string());
    write_checkpoint(os, model_entries(params));
}

ModelParams<float> load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot read checkpoint " + path.string());
    return model_from_entries(read_checkpoint(is));
}

}  // namespace tbs
