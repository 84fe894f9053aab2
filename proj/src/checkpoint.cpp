#include "pauselab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace pauselab {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'L', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return s;
}

template <class Real>
void write_values_le(std::ostream& out, const std::vector<Real>& values) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping here");
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(Real)));
}

template <class Real>
void read_values_le(std::istream& in, std::vector<Real>& values) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(Real)));
    if (!in) throw std::runtime_error("truncated checkpoint tensor data");
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"num_layers", cfg.num_layers}, {"num_heads", cfg.num_heads},
            {"d_model", cfg.d_model},       {"d_ff", cfg.d_ff},
            {"vocab_size", cfg.vocab_size}, {"max_seq_len", cfg.max_seq_len},
            {"init_scale", cfg.init_scale}, {"precision", cfg.precision == Precision::Double ? "double" : "single"}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.num_layers = j.at("num_layers").get<int>();
    cfg.num_heads = j.at("num_heads").get<int>();
    cfg.d_model = j.at("d_model").get<int>();
    cfg.d_ff = j.at("d_ff").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.max_seq_len = j.at("max_seq_len").get<int>();
    cfg.init_scale = j.at("init_scale").get<double>();
    cfg.precision = j.at("precision").get<std::string>() == "double" ? Precision::Double : Precision::Single;
    return cfg;
}

nlohmann::json read_header(std::istream& in, const std::string& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const std::uint32_t version = read_u32(in);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
    return nlohmann::json::parse(read_string(in));
}

}  // namespace

template <class Real>
void save_checkpoint(const std::string& path, const Model<Real>& model, const Vocab& vocab,
                     const std::string& provenance_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    write_u32(out, kFormatVersion);

    nlohmann::json header;
    header["config"] = config_to_json(model.config);
    header["vocab"] = vocab.token_list();
    header["provenance"] = nlohmann::json::parse(provenance_json);
    header["dtype"] = sizeof(Real) == 8 ? "f64" : "f32";
    write_string(out, header.dump());

    std::uint32_t count = 0;
    model.for_each_tensor([&count](const std::string&, const Tensor<Real>&) { ++count; });
    write_u32(out, count);
    model.for_each_tensor([&out](const std::string& name, const Tensor<Real>& t) {
        write_string(out, name);
        write_u32(out, static_cast<std::uint32_t>(t.rows));
        write_u32(out, static_cast<std::uint32_t>(t.cols));
        write_values_le(out, t.data);
    });
    if (!out) throw std::runtime_error("write failure for checkpoint: " + path);
}

template <class Real>
Checkpoint<Real> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    const nlohmann::json header = read_header(in, path);

    const std::string dtype = header.at("dtype").get<std::string>();
    const std::string want = sizeof(Real) == 8 ? "f64" : "f32";
    if (dtype != want)
        throw std::runtime_error("checkpoint " + path + " holds " + dtype + " tensors, expected " + want);

    Checkpoint<Real> ckpt;
    ckpt.vocab = Vocab::from_token_list(header.at("vocab").get<std::vector<std::string>>());
    ckpt.provenance_json = header.at("provenance").dump();
    const ModelConfig cfg = config_from_json(header.at("config"));
    ckpt.model = init_params<Real>(cfg, 0);

    const std::uint32_t count = read_u32(in);
    std::uint32_t seen = 0;
    ckpt.model.for_each_tensor([&](const std::string& name, Tensor<Real>& t) {
        const std::string stored = read_string(in);
        if (stored != name)
            throw std::runtime_error("checkpoint tensor order mismatch: expected " + name + ", got " + stored);
        const int rows = static_cast<int>(read_u32(in));
        const int cols = static_cast<int>(read_u32(in));
        if (rows != t.rows || cols != t.cols)
            throw std::runtime_error("checkpoint tensor shape mismatch for " + name);
        read_values_le(in, t.data);
        ++seen;
    });
    if (seen != count) throw std::runtime_error("checkpoint tensor count mismatch");
    return ckpt;
}

Precision checkpoint_precision(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    const nlohmann::json header = read_header(in, path);
    return header.at("dtype").get<std::string>() == "f64" ? Precision::Double : Precision::Single;
}

template void save_checkpoint<float>(const std::string&, const Model<float>&, const Vocab&, const std::string&);
template void save_checkpoint<double>(const std::string&, const Model<double>&, const Vocab&, const std::string&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace pauselab
