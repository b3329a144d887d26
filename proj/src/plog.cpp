#include "parsec/plog.hpp"

#include <fstream>
#include <limits>

namespace parsec {

void write_frame(std::ostream& out, ByteSpan payload) {
  if (payload.size() > std::numeric_limits<std::uint32_t>::max())
    throw IoError("frame too large");
  Bytes header;
  put_u32be(header, static_cast<std::uint32_t>(payload.size()));
  out.write(reinterpret_cast<const char*>(header.data()), 4);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("frame write failed");
}

bool read_frame(std::istream& in, Bytes& payload) {
  std::uint8_t len[4];
  in.read(reinterpret_cast<char*>(len), 4);
  if (in.gcount() == 0 && in.eof()) return false;
  if (in.gcount() != 4) throw ParseError("truncated frame header");
  const std::uint32_t n = get_u32be(len);
  payload.resize(n);
  in.read(reinterpret_cast<char*>(payload.data()), n);
  if (static_cast<std::uint32_t>(in.gcount()) != n)
    throw ParseError("truncated frame payload");
  return true;
}

std::vector<Bytes> read_plog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Bytes> frames;
  Bytes frame;
  while (read_frame(in, frame)) frames.push_back(frame);
  return frames;
}

void write_plog(const std::filesystem::path& path,
                const std::vector<Bytes>& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  for (const auto& f : frames) write_frame(out, f);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<SignedInvoice> read_chain_file(const std::filesystem::path& path) {
  std::vector<SignedInvoice> txs;
  for (const auto& frame : read_plog(path))
    txs.push_back(decode_signed_invoice(frame));
  return txs;
}

void write_chain_file(const std::filesystem::path& path,
                      std::span<const SignedInvoice> txs) {
  std::vector<Bytes> frames;
  frames.reserve(txs.size());
  for (const auto& si : txs)
    frames.push_back(canonical_encode(si, EncodeMode::Storage));
  write_plog(path, frames);
}

}  // namespace parsec
