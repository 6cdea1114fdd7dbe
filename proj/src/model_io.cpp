#include "wmlab/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace wmlab {

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

uint32_t crc32(const void* data, size_t len) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xffffffffu;
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i)
        crc = table[(crc ^ bytes[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

namespace {

constexpr char kMagic[4] = {'W', 'I', 'R', 'M'};

template <typename T>
void put(std::vector<unsigned char>& buf, T v) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <typename T>
T take(const std::vector<unsigned char>& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size())
        throw CorruptModel("model file truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_model(const CodecParams& params, const std::string& path) {
    auto& p = const_cast<CodecParams&>(params);
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put<uint32_t>(buf, kModelVersion);
    put<int32_t>(buf, params.config.n);
    put<int32_t>(buf, params.config.channels);
    put<int32_t>(buf, params.config.side);
    put<int32_t>(buf, params.config.filters);
    put<float>(buf, static_cast<float>(params.config.strength));
    put<uint32_t>(buf, static_cast<uint32_t>(params.config.seed & 0xffffffffu));
    put<uint32_t>(buf, static_cast<uint32_t>(params.config.seed >> 32));
    for (const auto& view : tensor_views(p))
        for (size_t i = 0; i < view.size; ++i) put<float>(buf, view.data[i]);
    put<uint32_t>(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("failed writing " + path);
}

CodecParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptModel("cannot open model file " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (buf.size() < 4 + 4 + 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw CorruptModel("bad model magic in " + path);
    {
        const uint32_t stored =
            *reinterpret_cast<const uint32_t*>(buf.data() + buf.size() - 4);
        const uint32_t computed = crc32(buf.data(), buf.size() - 4);
        if (stored != computed)
            throw CorruptModel("model checksum mismatch in " + path);
    }

    size_t pos = 4;
    const uint32_t version = take<uint32_t>(buf, pos);
    if (version != kModelVersion)
        throw CorruptModel("unsupported model version " + std::to_string(version) +
                           " in " + path);

    CodecConfig cfg;
    cfg.n = take<int32_t>(buf, pos);
    cfg.channels = take<int32_t>(buf, pos);
    cfg.side = take<int32_t>(buf, pos);
    cfg.filters = take<int32_t>(buf, pos);
    cfg.strength = take<float>(buf, pos);
    const uint64_t seed_lo = take<uint32_t>(buf, pos);
    const uint64_t seed_hi = take<uint32_t>(buf, pos);
    cfg.seed = seed_lo | (seed_hi << 32);
    cfg.validate();

    CodecParams params = init_codec(cfg, 0);
    for (auto& view : tensor_views(params))
        for (size_t i = 0; i < view.size; ++i) view.data[i] = take<float>(buf, pos);
    if (pos != buf.size() - 4)
        throw CorruptModel("model file has trailing bytes: " + path);
    return params;
}

}  // namespace wmlab
