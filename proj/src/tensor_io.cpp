#include "emrdm/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "emrdm/errors.hpp"

namespace emrdm {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'R', 'D'};

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float f) {
    uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw IoError("truncated tensor file: " + path);
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        const uint32_t bits = u32();
        float f = 0.0f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string serialize_header(const TensorFile& tf) {
    std::ostringstream os;
    for (const auto& [k, v] : tf.header) os << k << " = " << v << "\n";
    return os.str();
}

std::vector<std::pair<std::string, std::string>> parse_header(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        kv.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    return kv;
}

}  // namespace

bool TensorFile::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

const Tensor& TensorFile::get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw IoError("tensor file: missing tensor '" + name + "'");
}

bool TensorFile::header_has(const std::string& key) const {
    for (const auto& [k, v] : header)
        if (k == key) return true;
    return false;
}

std::string TensorFile::header_value(const std::string& key) const {
    for (const auto& [k, v] : header)
        if (k == key) return v;
    throw IoError("tensor file: missing header key '" + key + "'");
}

void write_tensor_file(const std::string& path, const TensorFile& tf) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kTensorFileVersion);
    const std::string header = serialize_header(tf);
    put_u32(out, static_cast<uint32_t>(header.size()));
    out += header;
    put_u32(out, static_cast<uint32_t>(tf.tensors.size()));
    for (const auto& [name, t] : tf.tensors) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        out.push_back(0);  // dtype 0 = f32
        out.push_back(4);  // rank
        const Shape s = t.shape();
        put_u32(out, static_cast<uint32_t>(s.l));
        put_u32(out, static_cast<uint32_t>(s.c));
        put_u32(out, static_cast<uint32_t>(s.h));
        put_u32(out, static_cast<uint32_t>(s.w));
        for (size_t i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write tensor file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

TensorFile read_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open tensor file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    const std::string buf = os.str();
    Reader r{buf, 0, path};

    const std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw IoError("not a tensor file (bad magic): " + path);
    const uint32_t version = r.u32();
    if (version != kTensorFileVersion)
        throw IoError("tensor file version mismatch in " + path + ": got " +
                      std::to_string(version) + ", expected " +
                      std::to_string(kTensorFileVersion));

    TensorFile tf;
    const uint32_t header_len = r.u32();
    tf.header = parse_header(r.bytes(header_len));
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const uint8_t dtype = r.u8();
        if (dtype != 0)
            throw IoError("tensor file " + path + ": unsupported dtype code " +
                          std::to_string(dtype));
        const uint8_t rank = r.u8();
        if (rank != 4)
            throw IoError("tensor file " + path + ": unsupported rank " +
                          std::to_string(rank));
        Shape s;
        s.l = static_cast<int>(r.u32());
        s.c = static_cast<int>(r.u32());
        s.h = static_cast<int>(r.u32());
        s.w = static_cast<int>(r.u32());
        Tensor t(s);
        for (size_t j = 0; j < t.size(); ++j) t[j] = static_cast<double>(r.f32());
        tf.tensors.emplace_back(std::move(name), std::move(t));
    }
    return tf;
}

void f32_snap_tensor(Tensor& t) {
    for (size_t i = 0; i < t.size(); ++i) t[i] = f32_snap(t[i]);
}

}  // namespace emrdm
