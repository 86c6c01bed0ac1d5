// seqrep/binary-io.h

// Copyright 2026  seqrep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQREP_BINARY_IO_H_
#define SEQREP_BINARY_IO_H_

// Little-endian primitives for the on-disk formats.  Values are assembled
// byte by byte so files are identical regardless of host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "seqrep/error.h"

namespace seqrep::binio {

inline void WriteU32(std::ostream &os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char *>(b), 4);
}

inline void WriteU64(std::ostream &os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char *>(b), 8);
}

inline void WriteI32(std::ostream &os, int32_t v) { WriteU32(os, static_cast<uint32_t>(v)); }
inline void WriteI64(std::ostream &os, int64_t v) { WriteU64(os, static_cast<uint64_t>(v)); }
inline void WriteF32(std::ostream &os, float v) { WriteU32(os, std::bit_cast<uint32_t>(v)); }
inline void WriteF64(std::ostream &os, double v) { WriteU64(os, std::bit_cast<uint64_t>(v)); }

inline void WriteMagic(std::ostream &os, const char (&magic)[5]) { os.write(magic, 4); }

inline void WriteString(std::ostream &os, const std::string &s) {
  WriteU32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void ReadExact(std::istream &is, void *dst, size_t n, const std::string &what) {
  is.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) throw IoError("truncated " + what);
}

inline uint32_t ReadU32(std::istream &is, const std::string &what) {
  unsigned char b[4];
  ReadExact(is, b, 4, what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t ReadU64(std::istream &is, const std::string &what) {
  unsigned char b[8];
  ReadExact(is, b, 8, what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline int32_t ReadI32(std::istream &is, const std::string &what) {
  return static_cast<int32_t>(ReadU32(is, what));
}
inline int64_t ReadI64(std::istream &is, const std::string &what) {
  return static_cast<int64_t>(ReadU64(is, what));
}
inline float ReadF32(std::istream &is, const std::string &what) {
  return std::bit_cast<float>(ReadU32(is, what));
}
inline double ReadF64(std::istream &is, const std::string &what) {
  return std::bit_cast<double>(ReadU64(is, what));
}

inline void ExpectMagic(std::istream &is, const char (&magic)[5], const std::string &what) {
  char got[4];
  ReadExact(is, got, 4, what);
  if (std::memcmp(got, magic, 4) != 0)
    throw IoError("bad magic in " + what + ": expected " + std::string(magic, 4));
}

inline std::string ReadString(std::istream &is, const std::string &what, uint32_t max_len = 1u << 20) {
  const uint32_t n = ReadU32(is, what);
  if (n > max_len) throw IoError("implausible string length in " + what);
  std::string s(n, '\0');
  ReadExact(is, s.data(), n, what);
  return s;
}

}  // namespace seqrep::binio

#endif  // SEQREP_BINARY_IO_H_
