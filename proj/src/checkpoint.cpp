#include "gti/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace gti {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'I', 'M'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint truncated");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 8);
}

double read_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("checkpoint truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_blob(std::ostream& out, const double* data, size_t len) {
    write_u32(out, static_cast<uint32_t>(len));
    for (size_t i = 0; i < len; ++i) write_f64(out, data[i]);
}

std::vector<double> read_blob(std::istream& in) {
    std::vector<double> v(read_u32(in));
    for (double& x : v) x = read_f64(in);
    return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(model.head_kind()));
    write_u32(out, static_cast<uint32_t>(model.input_dim()));
    write_u32(out, static_cast<uint32_t>(model.layer_count()));
    for (const Layer& l : model.layers()) {
        write_u32(out, static_cast<uint32_t>(l.kind));
        write_u32(out, static_cast<uint32_t>(l.in));
        write_u32(out, static_cast<uint32_t>(l.out));
        write_u32(out, static_cast<uint32_t>(l.img_h));
        write_u32(out, static_cast<uint32_t>(l.img_w));
        write_u32(out, static_cast<uint32_t>(l.patch));
        write_u32(out, static_cast<uint32_t>(l.features));
        write_f64(out, l.rate);
        write_f64(out, l.c);
        write_blob(out, l.W.data(), l.W.size());
        write_blob(out, l.b.data(), l.b.size());
        write_blob(out, l.gamma.data(), l.gamma.size());
        write_blob(out, l.beta.data(), l.beta.size());
        write_blob(out, l.run_mean.data(), l.run_mean.size());
        write_blob(out, l.run_var.data(), l.run_var.size());
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a model checkpoint: " + path);
    if (read_u32(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");

    const HeadKind head = static_cast<HeadKind>(read_u32(in));
    const int input_dim = static_cast<int>(read_u32(in));
    const int layer_count = static_cast<int>(read_u32(in));

    Model model(input_dim);
    for (int k = 0; k < layer_count; ++k) {
        const LayerKind kind = static_cast<LayerKind>(read_u32(in));
        const int lin = static_cast<int>(read_u32(in));
        const int lout = static_cast<int>(read_u32(in));
        const int img_h = static_cast<int>(read_u32(in));
        const int img_w = static_cast<int>(read_u32(in));
        const int patch = static_cast<int>(read_u32(in));
        const int features = static_cast<int>(read_u32(in));
        const double rate = read_f64(in);
        const double c = read_f64(in);
        (void)lin;
        switch (kind) {
            case LayerKind::dense: model.dense(lout); break;
            case LayerKind::relu: model.relu(); break;
            case LayerKind::dropout: model.dropout(rate); break;
            case LayerKind::batchnorm: model.batchnorm(); break;
            case LayerKind::patch_dense:
                model.patch_dense(img_h, img_w, patch, features);
                break;
            case LayerKind::quadratic: model.quadratic(); break;
        }
        Layer& l = model.layer(k);
        l.c = c;
        auto W = read_blob(in);
        if (W.size() != l.W.size()) throw std::runtime_error("checkpoint weight shape mismatch");
        std::copy(W.begin(), W.end(), l.W.data());
        l.b = read_blob(in);
        l.gamma = read_blob(in);
        l.beta = read_blob(in);
        l.run_mean = read_blob(in);
        l.run_var = read_blob(in);
    }
    model.head(head);
    return model;
}

}  // namespace gti
