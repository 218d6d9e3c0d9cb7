#include "asid/weight_store.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asid/errors.hpp"
#include "asid/network.hpp"

namespace asid {

// On-disk layout (this code assumes a little-endian host):
//   char[8]  "ASIDWS01"
//   u32      config text length, then that many bytes (key=value lines)
//   u32      tensor count
//   per tensor: u16 name length, name bytes, u8 rank, i32 dims[rank],
//               u64 element count, f32 values
namespace {

constexpr char kMagic[8] = {'A', 'S', 'I', 'D', 'W', 'S', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw StoreError(std::string("corrupt weight store: truncated ") + what);
    return v;
}

} // namespace

void save_weights(const std::string& path, const ModelConfig& cfg, const ParamMap& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write weight store '" + path + "'");

    out.write(kMagic, sizeof kMagic);
    const std::string header = serialize_config(cfg);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));

    for (const auto& [name, t] : params) {
        write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
        for (int d : t.shape()) write_pod<std::int32_t>(out, d);
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.numel()));
        for (long long i = 0; i < t.numel(); ++i)
            write_pod<float>(out, static_cast<float>(t.data()[i]));
    }
    if (!out) throw DataError("write failed for weight store '" + path + "'");
}

LoadedModel load_weights(const std::string& path, Dtype dt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weight store '" + path + "'");

    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw StoreError("corrupt weight store: bad magic in '" + path + "'");

    const auto header_len = read_pod<std::uint32_t>(in, "header");
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw StoreError("corrupt weight store: truncated config header");

    LoadedModel m;
    try {
        m.config = parse_config_text(header);
    } catch (const ConfigError& e) {
        throw StoreError(std::string("corrupt weight store: bad config echo: ") + e.what());
    }

    const auto count = read_pod<std::uint32_t>(in, "tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint16_t>(in, "tensor name");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw StoreError("corrupt weight store: truncated tensor name");
        const auto rank = read_pod<std::uint8_t>(in, "tensor rank");
        std::vector<int> shape(rank);
        for (auto& d : shape) d = read_pod<std::int32_t>(in, "tensor shape");
        const auto n = read_pod<std::uint64_t>(in, "element count");
        if (static_cast<long long>(n) != shape_numel(shape))
            throw StoreError("corrupt weight store: element count of '" + name +
                             "' does not match its shape");
        std::vector<double> values(n);
        for (std::uint64_t j = 0; j < n; ++j)
            values[j] = static_cast<double>(read_pod<float>(in, "tensor data"));
        if (m.params.count(name))
            throw StoreError("corrupt weight store: duplicate tensor '" + name + "'");
        m.params[name] = Tensor::from_vector(std::move(values), shape, dt);
    }

    // shapes must agree with what the echoed config builds
    const std::vector<ParamSpec> specs = enumerate_params(m.config);
    if (specs.size() != m.params.size())
        throw StoreError("weight store holds " + std::to_string(m.params.size()) +
                         " tensors but the config needs " + std::to_string(specs.size()));
    for (const ParamSpec& s : specs) {
        auto it = m.params.find(s.name);
        if (it == m.params.end())
            throw StoreError("weight store is missing tensor '" + s.name + "'");
        if (it->second.shape() != s.shape)
            throw StoreError("weight store tensor '" + s.name + "' has shape " +
                             it->second.shape_str() + ", config expects " +
                             shape_to_string(s.shape));
    }
    return m;
}

void require_config_match(const ModelConfig& requested, const ModelConfig& stored) {
    const std::string a = serialize_config(requested);
    const std::string b = serialize_config(stored);
    if (a == b) return;
    std::istringstream ia(a), ib(b);
    std::string la, lb;
    while (std::getline(ia, la) && std::getline(ib, lb)) {
        if (la != lb)
            throw StoreError("weight store config mismatch: requested " + la +
                             ", store has " + lb);
    }
    throw StoreError("weight store config mismatch");
}

} // namespace asid
