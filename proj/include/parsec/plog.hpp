#pragma once

// Framed record files (.plog): each frame is a 4-byte big-endian length
// followed by that many payload bytes, back to back until EOF. A chain file
// is a .plog whose frames are storage-mode SignedInvoice encodings.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "parsec/bytes.hpp"
#include "parsec/protocol.hpp"

namespace parsec {

void write_frame(std::ostream& out, ByteSpan payload);
// Returns false on clean EOF, throws ParseError on a truncated frame.
bool read_frame(std::istream& in, Bytes& payload);

std::vector<Bytes> read_plog(const std::filesystem::path& path);
void write_plog(const std::filesystem::path& path,
                const std::vector<Bytes>& frames);

std::vector<SignedInvoice> read_chain_file(const std::filesystem::path& path);
void write_chain_file(const std::filesystem::path& path,
                      std::span<const SignedInvoice> txs);

}  // namespace parsec
