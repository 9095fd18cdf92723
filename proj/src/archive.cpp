#include "sno/archive.hpp"

#include "sno/error.hpp"
#include "sno/hash.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace sno::nn {

namespace {

constexpr unsigned char kMagic[8] = {'S', 'N', 'O', 'T', 'E', 'N', 'S', '\0'};

class Reader {
public:
    Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

    const unsigned char* take(std::size_t len) {
        if (len > n_ - pos_) fail(ErrorKind::ChecksumError, "archive truncated");
        const unsigned char* out = p_ + pos_;
        pos_ += len;
        return out;
    }
    std::uint32_t u32() { return get_u32(take(4)); }
    std::uint64_t u64() { return get_u64(take(8)); }
    std::size_t remaining() const { return n_ - pos_; }

private:
    const unsigned char* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

}  // namespace

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

double get_f64(const unsigned char* p) {
    const std::uint64_t bits = get_u64(p);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

std::vector<unsigned char> encode_archive(const std::vector<NamedTensor>& tensors) {
    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kArchiveMajor);
    put_u32(out, kArchiveMinor);
    put_u64(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put_u64(out, d);
        for (double v : t.data()) put_f64(out, v);
    }
    put_u64(out, fnv1a(out));
    return out;
}

std::vector<NamedTensor> decode_archive(const std::vector<unsigned char>& bytes) {
    require(bytes.size() >= 16 && std::memcmp(bytes.data(), kMagic, 8) == 0,
            ErrorKind::FormatError, "not a tensor archive");
    const std::uint32_t major = get_u32(bytes.data() + 8);
    require(major == kArchiveMajor, ErrorKind::FormatError,
            "unsupported archive version " + std::to_string(major));
    require(bytes.size() >= 32, ErrorKind::ChecksumError, "archive truncated");
    const std::size_t body = bytes.size() - 8;
    require(fnv1a({bytes.data(), body}) == get_u64(bytes.data() + body), ErrorKind::ChecksumError,
            "archive checksum mismatch");

    Reader r(bytes.data(), body);
    r.take(16);
    const std::uint64_t count = r.u64();
    std::vector<NamedTensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        const unsigned char* name = r.take(len);
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = r.u64();
            numel *= d;
        }
        require(numel <= r.remaining() / 8, ErrorKind::ChecksumError, "archive payload truncated");
        const unsigned char* payload = r.take(numel * 8);
        std::vector<double> data(numel);
        for (std::size_t k = 0; k < numel; ++k) data[k] = get_f64(payload + 8 * k);
        out.emplace_back(std::string(reinterpret_cast<const char*>(name), len),
                         Tensor(std::move(shape), std::move(data)));
    }
    require(r.remaining() == 0, ErrorKind::ChecksumError, "trailing bytes in archive");
    return out;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        require(static_cast<bool>(out), ErrorKind::IoError, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_archive(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    write_file_bytes(path, encode_archive(tensors));
}

std::vector<NamedTensor> read_archive(const std::filesystem::path& path) {
    return decode_archive(read_file_bytes(path));
}

}  // namespace sno::nn
