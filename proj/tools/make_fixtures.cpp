// Regenerates the committed fixtures under testdata/. Everything is
// seeded, so reruns are byte-identical.

#include <filesystem>
#include <iostream>

#include "parsec/plog.hpp"

using namespace parsec;

int main(int argc, char** argv) {
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : "testdata";
  std::filesystem::create_directories(out_dir);

  const KeyPair alice = KeyPair::from_seed(digest(str_bytes("fixture.alice")).span());
  const KeyPair bob = KeyPair::from_seed(digest(str_bytes("fixture.bob")).span());
  Rng id_rng(1);

  std::vector<SignedInvoice> chain;
  for (std::uint64_t i = 1; i <= 8; ++i) {
    Invoice inv;
    const KeyPair& buyer = i % 2 ? alice : bob;
    const KeyPair& seller = i % 2 ? bob : alice;
    inv.invoice_address = derive_address(seller.public_key, Currency::ETH);
    inv.price = 10 * i;
    inv.currency = Currency::ETH;
    inv.invoice_type = "payment";
    const SignedInvoice* pred = chain.empty() ? nullptr : &chain.back();
    chain.push_back(
        make_signed_invoice(inv, pred, "fixture", i, buyer, seller, id_rng));
  }
  write_chain_file(out_dir / "chain_valid.plog", chain);

  // Bump one price without re-signing: the signature check must fail at
  // position 4 and the successor's hash pointer at position 5.
  chain[3].price += 1;
  write_chain_file(out_dir / "chain_tampered.plog", chain);

  std::cout << "wrote " << (out_dir / "chain_valid.plog").string() << " and "
            << (out_dir / "chain_tampered.plog").string() << "\n";
  return 0;
}
