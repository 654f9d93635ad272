#include "ser/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ser/error.hpp"

namespace ser {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'R', 'C', 'K', 'P', 'T', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const RunConfig& config, std::uint64_t vocab_hash) {
    const auto named = named_parameters(params);

    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : named)
        tensors.push_back({{"name", name}, {"shape", t.shape()}});
    nlohmann::json header{{"format_version", 1},
                          {"config", config.to_json()},
                          {"dims",
                           {{"audio_feature_dim", params.dims.audio_feature_dim},
                            {"prosody_dim", params.dims.prosody_dim},
                            {"vocab_size", params.dims.vocab_size}}},
                          {"vocab_hash", vocab_hash},
                          {"tensors", tensors}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("save_checkpoint: cannot write " + path.string());
    out.write(kMagic, 8);
    write_u64_le(out, header_str.size());
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : named) {
        // Doubles serialized via their little-endian byte representation.
        static_assert(sizeof(double) == 8);
        for (double v : t.values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            write_u64_le(out, bits);
        }
    }
    if (!out) throw RuntimeFailure("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot read " + path.string());

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("load_checkpoint: " + path.string() + " is not a checkpoint file");

    const std::uint64_t header_len = read_u64_le(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("load_checkpoint: truncated header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_checkpoint: bad header JSON: " + std::string(e.what()));
    }

    Checkpoint ckpt;
    ckpt.config = RunConfig::from_json(header.at("config"));
    ckpt.dims.audio_feature_dim = header.at("dims").at("audio_feature_dim").get<std::size_t>();
    ckpt.dims.prosody_dim = header.at("dims").at("prosody_dim").get<std::size_t>();
    ckpt.dims.vocab_size = header.at("dims").at("vocab_size").get<std::size_t>();
    ckpt.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();

    ckpt.params = init_model(ckpt.config, ckpt.dims, Rng(ckpt.config.seed));
    auto named = named_parameters(ckpt.params);

    const auto& tensors = header.at("tensors");
    if (tensors.size() != named.size())
        throw DataError("load_checkpoint: header lists " + std::to_string(tensors.size()) +
                        " tensors, model has " + std::to_string(named.size()));
    for (std::size_t i = 0; i < named.size(); ++i) {
        auto& [name, t] = named[i];
        const std::string file_name = tensors[i].at("name").get<std::string>();
        if (file_name != name)
            throw DataError("load_checkpoint: tensor " + std::to_string(i) + " is '" +
                            file_name + "', expected '" + name + "'");
        const auto file_shape = tensors[i].at("shape").get<Shape>();
        if (file_shape != t.shape())
            throw DataError("load_checkpoint: tensor '" + name + "' has shape " +
                            shape_str(file_shape) + ", expected " + shape_str(t.shape()));
        for (double& v : t.values()) {
            const std::uint64_t bits = read_u64_le(in);
            std::memcpy(&v, &bits, 8);
        }
        if (!in) throw DataError("load_checkpoint: truncated payload at tensor '" + name + "'");
    }
    return ckpt;
}

}  // namespace ser
