#include "coca/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace coca {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'C', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u8(std::ostream& out, std::uint8_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix(std::ostream& out, const Matrix& m) {
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

void write_store(std::ostream& out, const ParamStore& store) {
    write_u32(out, static_cast<std::uint32_t>(store.count()));
    for (int i = 0; i < store.count(); ++i) {
        write_string(out, store.name(i));
        write_matrix(out, store.value(i));
    }
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    ensure(in.good(), "checkpoint: truncated file");
    return v;
}

std::uint8_t read_u8(std::istream& in) {
    std::uint8_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    ensure(in.good(), "checkpoint: truncated file");
    return v;
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    ensure(in.good(), "checkpoint: truncated file");
    return v;
}

std::string read_string(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    ensure(in.good(), "checkpoint: truncated file");
    return s;
}

Matrix read_matrix(std::istream& in) {
    const std::uint32_t r = read_u32(in);
    const std::uint32_t c = read_u32(in);
    Matrix m(r, c);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    ensure(in.good(), "checkpoint: truncated file");
    return m;
}

ParamStore read_store(std::istream& in) {
    ParamStore store;
    const std::uint32_t n = read_u32(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = read_string(in);
        store.add(name, read_matrix(in));
    }
    return store;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    ensure(out.good(), "checkpoint: cannot write '" + path + "'");
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);

    const ModelConfig& c = ckpt.config;
    write_u32(out, static_cast<std::uint32_t>(c.in_channels));
    for (int ch : c.conv_channels) write_u32(out, static_cast<std::uint32_t>(ch));
    write_u32(out, static_cast<std::uint32_t>(c.kernel_size));
    write_f64(out, c.dropout);
    write_u32(out, static_cast<std::uint32_t>(c.hidden_size));
    write_u32(out, static_cast<std::uint32_t>(c.project_channels));
    write_u32(out, static_cast<std::uint32_t>(c.window_length));

    write_store(out, ckpt.params);
    write_store(out, ckpt.buffers);

    write_u8(out, ckpt.center.values.size() > 0 ? 1 : 0);
    if (ckpt.center.values.size() > 0) {
        write_u8(out, ckpt.center.frozen ? 1 : 0);
        Matrix ce = ckpt.center.values;
        write_matrix(out, ce);
    }

    write_u32(out, static_cast<std::uint32_t>(ckpt.norm_stats.size()));
    for (const NamedNormStats& ns : ckpt.norm_stats) {
        write_string(out, ns.object_id);
        write_matrix(out, ns.stats.mean);
        write_matrix(out, ns.stats.std);
    }
    ensure(out.good(), "checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    ensure(in.good(), "checkpoint: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    ensure(in.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0,
           "checkpoint: '" + path + "' is not a checkpoint file");
    const std::uint32_t version = read_u32(in);
    ensure(version == kVersion,
           "checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    ModelConfig& c = ckpt.config;
    c.in_channels = static_cast<int>(read_u32(in));
    c.conv_channels.resize(3);
    for (int i = 0; i < 3; ++i) c.conv_channels[static_cast<std::size_t>(i)] = static_cast<int>(read_u32(in));
    c.kernel_size = static_cast<int>(read_u32(in));
    c.dropout = read_f64(in);
    c.hidden_size = static_cast<int>(read_u32(in));
    c.project_channels = static_cast<int>(read_u32(in));
    c.window_length = static_cast<int>(read_u32(in));

    ckpt.params = read_store(in);
    ckpt.buffers = read_store(in);

    if (read_u8(in) != 0) {
        ckpt.center.frozen = read_u8(in) != 0;
        const Matrix ce = read_matrix(in);
        ckpt.center.values = ce.col(0);
    }

    const std::uint32_t n_stats = read_u32(in);
    for (std::uint32_t i = 0; i < n_stats; ++i) {
        NamedNormStats ns;
        ns.object_id = read_string(in);
        ns.stats.mean = read_matrix(in).col(0);
        ns.stats.std = read_matrix(in).col(0);
        ckpt.norm_stats.push_back(std::move(ns));
    }
    return ckpt;
}

}  // namespace coca
