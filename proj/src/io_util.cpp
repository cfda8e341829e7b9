#include "fnode/io_util.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "fnode/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are defined little-endian; big-endian hosts are unsupported");

namespace fnode {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw InternalError("format_double: to_chars failed");
    return std::string(buf, ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

void atomic_write_file(const std::filesystem::path& path, std::string_view contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for write: " + tmp.string());
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::string out;
    f.seekg(0, std::ios::end);
    out.resize(static_cast<std::size_t>(f.tellg()));
    f.seekg(0);
    f.read(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("read failed: " + path.string());
    return out;
}

void append_f64_block(std::string& out, std::span<const double> values) {
    const std::size_t start = out.size();
    out.resize(start + values.size() * sizeof(double));
    std::memcpy(out.data() + start, values.data(), values.size() * sizeof(double));
}

std::vector<double> read_f64_block(const std::string& bytes, std::size_t& offset,
                                   std::size_t count) {
    if (offset + count * sizeof(double) > bytes.size())
        throw std::runtime_error("truncated binary block");
    std::vector<double> out(count);
    std::memcpy(out.data(), bytes.data() + offset, count * sizeof(double));
    offset += count * sizeof(double);
    return out;
}

}  // namespace fnode
