#pragma once

// Shared helpers for the test suite: deterministic keys, a two-party
// channel config, and a chain builder with alternating payment direction.

#include <string>
#include <vector>

#include "parsec/node.hpp"
#include "parsec/protocol.hpp"

namespace parsec::test {

inline KeyPair test_keys(const std::string& name) {
  return KeyPair::from_seed(digest(str_bytes("test." + name)).span());
}

struct Channel {
  KeyPair a = test_keys("alice");
  KeyPair b = test_keys("bob");
  ChannelConfig config;

  explicit Channel(std::uint64_t deposit_a = 1000,
                   std::uint64_t deposit_b = 1000,
                   const std::string& name = "test") {
    config.channel = name;
    config.currency = Currency::ETH;
    config.party_a = derive_address(a.public_key, Currency::ETH);
    config.party_b = derive_address(b.public_key, Currency::ETH);
    config.pubkey_a = a.public_key;
    config.pubkey_b = b.public_key;
    config.deposit_a = deposit_a;
    config.deposit_b = deposit_b;
    config.n = 4;
    config.m = 1000000;  // keep modulo checkpoints out of the way
  }

  // Chain of `length` payments; every third one flows b -> a.
  std::vector<SignedInvoice> build_chain(std::size_t length,
                                         std::uint64_t seed = 1,
                                         std::uint64_t price = 5) const {
    Rng id_rng(seed);
    std::vector<SignedInvoice> chain;
    chain.reserve(length);
    for (std::size_t i = 1; i <= length; ++i) {
      const bool reverse = i % 3 == 0;
      const KeyPair& buyer = reverse ? b : a;
      const KeyPair& seller = reverse ? a : b;
      Invoice inv;
      inv.invoice_address = derive_address(seller.public_key, config.currency);
      inv.price = price;
      inv.currency = config.currency;
      inv.invoice_type = "payment";
      const SignedInvoice* pred = chain.empty() ? nullptr : &chain.back();
      chain.push_back(make_signed_invoice(inv, pred, config.channel, i, buyer,
                                          seller, id_rng));
    }
    return chain;
  }
};

}  // namespace parsec::test
