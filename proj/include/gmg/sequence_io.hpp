#pragma once

#include <fstream>
#include <string>

#include "gmg/binary_io.hpp"
#include "gmg/datasets.hpp"

namespace gmg {

/// Sequence file layout, all integers little-endian:
///   "GMGS" | u8 version (1) | u32 ndims | u32 dims[ndims] | u8 dtype (1 = f32)
///   | payload | u32 json length | UTF-8 JSON metadata
constexpr char kSequenceMagic[4] = {'G', 'M', 'G', 'S'};
constexpr std::uint8_t kSequenceVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;

inline void write_sequences(std::ostream& os, const SequenceRecord& rec) {
  os.write(kSequenceMagic, 4);
  io::put_le<std::uint8_t>(os, kSequenceVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(rec.data.rank()));
  for (int d : rec.data.shape()) io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  io::put_le<std::uint8_t>(os, kDtypeF32);
  io::put_f32_array(os, rec.data.data(), rec.data.size());
  const std::string meta = rec.meta.dump();
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
}

inline void save_sequences(const SequenceRecord& rec, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_sequences(os, rec);
  if (!os) throw IoError("write failed for " + path);
}

/// Parses a sequence file; rejects values outside [0, 1] with ValidationError.
inline SequenceRecord read_sequences(std::istream& is, const std::string& what) {
  io::Reader r(is, what);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kSequenceMagic, 4) != 0) throw HeaderError(what + ": bad magic (not a GMGS sequence file)");
  const auto version = r.le<std::uint8_t>("version");
  if (version != kSequenceVersion) throw HeaderError(what + ": unsupported version " + std::to_string(version));
  const auto ndims = r.le<std::uint32_t>("dims count");
  if (ndims != 5) throw HeaderError(what + ": expected 5 dims (B,T,C,H,W), header says " + std::to_string(ndims));
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    const auto d = r.le<std::uint32_t>("dims");
    if (d == 0 || d > (1u << 24)) throw HeaderError(what + ": implausible dimension " + std::to_string(d));
    shape.push_back(static_cast<int>(d));
    count *= d;
  }
  const auto dtype = r.le<std::uint8_t>("dtype");
  if (dtype != kDtypeF32) throw DtypeError(what + ": dtype code " + std::to_string(dtype) + " is not f32 (1)");
  const std::uint64_t need = count * sizeof(float);
  const std::uint64_t have = r.remaining();
  if (have < need)
    throw TruncationError(what + ": header declares " + shape_str(shape) + " (" + std::to_string(need) +
                          " payload bytes) but only " + std::to_string(have) + " remain");
  SequenceRecord rec;
  rec.data = Tensor<float>(shape);
  r.f32_array(rec.data.data(), rec.data.size(), "payload");
  const auto len = r.le<std::uint32_t>("metadata length");
  const std::string meta = r.string(len, "metadata");
  try {
    rec.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(what + ": metadata is not valid JSON (" + e.what() + ")");
  }
  validate_unit_range(rec.data, what);
  return rec;
}

inline SequenceRecord load_sequences(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_sequences(is, path);
}

}  // namespace gmg
