#pragma once

// Named-tensor archive.
//
//   magic    "SNOTENS\0"                     8 bytes
//   version  u32 major, u32 minor
//   count    u64
//   per tensor:
//     u32 name length, name bytes
//     u32 rank, u64 dims[rank]
//     f64 payload[prod(dims)]
//   checksum u64 FNV-1a over every preceding byte
//
// All integers and floats are little-endian regardless of host byte order.

#include "sno/tensor.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace sno::nn {

inline constexpr std::uint32_t kArchiveMajor = 1;
inline constexpr std::uint32_t kArchiveMinor = 0;

using NamedTensor = std::pair<std::string, Tensor>;

std::vector<unsigned char> encode_archive(const std::vector<NamedTensor>& tensors);

// FormatError on bad magic or unknown major version; ChecksumError on
// truncation, trailing garbage or checksum mismatch.
std::vector<NamedTensor> decode_archive(const std::vector<unsigned char>& bytes);

void write_archive(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_archive(const std::filesystem::path& path);

// Little-endian byte helpers shared with the dataset format.
void put_u32(std::vector<unsigned char>& out, std::uint32_t v);
void put_u64(std::vector<unsigned char>& out, std::uint64_t v);
void put_f64(std::vector<unsigned char>& out, double v);
std::uint32_t get_u32(const unsigned char* p);
std::uint64_t get_u64(const unsigned char* p);
double get_f64(const unsigned char* p);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
// Writes to a temporary sibling and renames, so a failed write leaves no partial file.
void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace sno::nn
