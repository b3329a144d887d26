// Command-line front door. Reports and machine-readable output go to
// stdout, diagnostics to stderr. Exit codes: 0 success, 1 failed
// verification or divergence, 2 bad usage or unreadable input.

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "parsec/chain.hpp"
#include "parsec/oracle.hpp"
#include "parsec/plog.hpp"
#include "parsec/simulator.hpp"

namespace {

using namespace parsec;

constexpr std::string_view kKeyHeader = "parsec-key v1";
constexpr std::string_view kInvoiceHeader = "parsec-invoice v1";

void write_key_file(const std::filesystem::path& path, const KeyPair& kp) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kKeyHeader << "\n";
  out << "public " << kp.public_key.hex() << "\n";
  out << "secret " << to_hex(kp.private_key.bytes) << "\n";
  out << "address " << derive_address(kp.public_key, Currency::ETH).display()
      << "\n";
  out << "address " << derive_address(kp.public_key, Currency::BTC).display()
      << "\n";
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

KeyPair read_key_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (header != kKeyHeader)
    throw ParseError(path.string() + " is not a key file");
  KeyPair kp;
  bool have_public = false, have_secret = false;
  std::string field, value;
  while (in >> field >> value) {
    if (field == "public") {
      kp.public_key = PublicKey::from_bytes(from_hex(value));
      have_public = true;
    } else if (field == "secret") {
      kp.private_key = SecretKey::from_bytes(from_hex(value));
      have_secret = true;
    } else if (field == "address") {
      Address::parse(value);  // validity only; addresses are re-derivable
    } else {
      throw ParseError(path.string() + ": unknown key file field " + field);
    }
  }
  if (!have_public || !have_secret)
    throw ParseError(path.string() + " is missing key material");
  if (public_key_of(kp.private_key) != kp.public_key)
    throw ParseError(path.string() + ": public key does not match secret");
  return kp;
}

void write_invoice_file(const std::filesystem::path& path, const Invoice& inv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kInvoiceHeader << "\n";
  out << "supplier " << inv.invoice_address.display() << "\n";
  out << "price " << inv.price << "\n";
  out << "currency " << currency_symbol(inv.currency) << "\n";
  if (!inv.invoice_type.empty()) out << "type " << inv.invoice_type << "\n";
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

Invoice read_invoice_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (header != kInvoiceHeader)
    throw ParseError(path.string() + " is not an invoice file");
  Invoice inv;
  bool have_supplier = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field, value;
    ls >> field;
    std::getline(ls, value);
    if (const auto sp = value.find_first_not_of(' '); sp != std::string::npos)
      value = value.substr(sp);
    if (field == "supplier") {
      inv.invoice_address = Address::parse(value);
      inv.currency = inv.invoice_address.currency;
      have_supplier = true;
    } else if (field == "price") {
      inv.price = std::stoull(value);
    } else if (field == "currency") {
      const auto c = parse_currency(value);
      if (!c) throw ParseError(value + " is not an allowed currency");
      inv.currency = *c;
    } else if (field == "type") {
      inv.invoice_type = value;
    } else {
      throw ParseError(path.string() + ": unknown invoice field " + field);
    }
  }
  if (!have_supplier)
    throw ParseError(path.string() + " is missing the supplier address");
  return inv;
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (std::uint64_t{rd()} << 32) | rd();
}

int cmd_keygen(const std::string& out_path, std::optional<std::uint64_t> seed) {
  KeyPair kp;
  if (seed) {
    Bytes material;
    const std::string_view domain = "parsec.cli.key";
    material.insert(material.end(), domain.begin(), domain.end());
    put_u64be(material, *seed);
    kp = KeyPair::from_seed(digest(material).span());
  } else {
    kp = KeyPair::generate();
  }
  write_key_file(out_path, kp);
  std::cout << derive_address(kp.public_key, Currency::ETH).display() << "\n";
  return 0;
}

int cmd_invoice(const std::string& out_path, const std::string& supplier,
                const std::string& supplier_key, std::uint64_t price,
                const std::string& type) {
  Invoice inv;
  if (supplier.empty() == supplier_key.empty())
    throw ConfigError("give exactly one of --supplier / --supplier-key");
  if (!supplier.empty()) {
    inv.invoice_address = Address::parse(supplier);
  } else {
    const KeyPair kp = read_key_file(supplier_key);
    inv.invoice_address = derive_address(kp.public_key, Currency::ETH);
  }
  inv.currency = inv.invoice_address.currency;
  inv.price = price;
  inv.invoice_type = type;
  write_invoice_file(out_path, inv);
  return 0;
}

int cmd_sign(const std::string& chain_path, const std::string& invoice_path,
             const std::string& buyer_key_path,
             const std::string& seller_key_path, const std::string& channel,
             std::optional<std::uint64_t> seed) {
  const Invoice inv = read_invoice_file(invoice_path);
  const KeyPair buyer = read_key_file(buyer_key_path);
  const KeyPair seller = read_key_file(seller_key_path);
  if (derive_address(seller.public_key, inv.currency) != inv.invoice_address)
    throw ConfigError("seller key does not own the invoice address");

  std::vector<SignedInvoice> chain;
  if (std::filesystem::exists(chain_path))
    chain = read_chain_file(chain_path);
  const SignedInvoice* predecessor = chain.empty() ? nullptr : &chain.back();

  Rng id_rng(seed ? *seed : fresh_seed());
  const SignedInvoice si =
      make_signed_invoice(inv, predecessor, channel, chain.size() + 1, buyer,
                          seller, id_rng);
  chain.push_back(si);
  write_chain_file(chain_path, chain);
  std::cout << si.invoice_id << "\n";
  return 0;
}

int cmd_verify_chain(const std::string& chain_path) {
  const std::vector<SignedInvoice> chain = read_chain_file(chain_path);
  if (chain.empty())
    throw ParseError(chain_path + " holds no transactions");
  const std::vector<ChainFault> faults = chain_report(chain);
  if (faults.empty()) {
    std::cout << "ok " << chain.size() << " transactions\n";
    return 0;
  }
  for (const ChainFault& f : faults) {
    std::cout << "violation index=" << f.position << " "
              << violation_name(f.violation.kind);
    if (!f.violation.detail.empty()) std::cout << " " << f.violation.detail;
    std::cout << "\n";
  }
  return 1;
}

int cmd_run(const std::string& scenario_path,
            std::optional<std::uint64_t> seed, const std::string& report_path,
            ReportFormat format, bool parallel) {
  Scenario s = Scenario::parse_file(scenario_path);
  if (seed) s.seed = *seed;
  const SimReport report =
      run_scenario(s, parallel ? SimMode::Parallel : SimMode::Serial);
  const std::string rendered = report.render(format);
  if (report_path.empty()) {
    std::cout << rendered;
  } else {
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + report_path);
    out << rendered;
    if (!out.flush()) throw IoError("write failed for " + report_path);
  }
  if (report.diverged()) {
    std::cerr << "divergence detected\n";
    return 1;
  }
  return 0;
}

int cmd_replay(const std::string& chain_path, const std::string& key_a_path,
               const std::string& key_b_path, std::uint64_t deposit_a,
               std::uint64_t deposit_b) {
  const std::vector<SignedInvoice> chain = read_chain_file(chain_path);
  if (chain.empty())
    throw ParseError(chain_path + " holds no transactions");

  ChannelConfig config;
  config.channel = chain.front().channel;
  config.currency = chain.front().currency;
  const KeyPair a = read_key_file(key_a_path);
  const KeyPair b = read_key_file(key_b_path);
  config.party_a = derive_address(a.public_key, config.currency);
  config.party_b = derive_address(b.public_key, config.currency);
  config.pubkey_a = a.public_key;
  config.pubkey_b = b.public_key;
  config.deposit_a = deposit_a;
  config.deposit_b = deposit_b;
  config.validate();

  const OracleResult r = oracle_replay(chain, config);
  for (const auto& [addr, amount] : r.balances)
    std::cout << "balance " << addr.display() << "=" << amount << "\n";
  std::cout << "head " << r.chain_head.hex() << "\n";
  std::cout << "sequence " << r.final_sequence << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parsec: state channel tooling"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed for deterministic output");

  std::string out_path;
  auto* keygen = app.add_subcommand("keygen", "generate a keypair file");
  keygen->add_option("--out", out_path, "key file path")->required();

  std::string supplier, supplier_key, inv_type = "payment";
  std::uint64_t price = 0;
  auto* invoice = app.add_subcommand("invoice", "write an invoice file");
  invoice->add_option("--out", out_path, "invoice file path")->required();
  invoice->add_option("--supplier", supplier, "seller address (hex:CUR)");
  invoice->add_option("--supplier-key", supplier_key,
                      "derive the seller address from this key file");
  invoice->add_option("--price", price, "amount, smallest unit")->required();
  invoice->add_option("--type", inv_type, "invoice type tag");

  std::string chain_path, invoice_path, buyer_key, seller_key;
  std::string channel = "default";
  auto* sign = app.add_subcommand(
      "sign", "co-sign the next transaction onto a chain file");
  sign->add_option("--chain", chain_path, "chain .plog, created if absent")
      ->required();
  sign->add_option("--invoice", invoice_path, "invoice file")->required();
  sign->add_option("--buyer-key", buyer_key, "buyer key file")->required();
  sign->add_option("--seller-key", seller_key, "seller key file")->required();
  sign->add_option("--channel", channel, "channel name");

  auto* verify = app.add_subcommand("verify-chain", "check a chain file");
  verify->add_option("chain", chain_path, "chain .plog")->required();

  std::string scenario_path, report_path, format_name = "text";
  bool parallel = false;
  auto* run = app.add_subcommand("run", "execute a scenario file");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--report", report_path, "write the report here");
  run->add_option("--format", format_name, "text or kv");
  run->add_flag("--parallel", parallel, "run channels on parallel tasks");

  std::string key_a, key_b;
  std::uint64_t deposit_a = 0, deposit_b = 0;
  auto* replay = app.add_subcommand(
      "replay", "replay a chain file against fresh deposits");
  replay->add_option("--chain", chain_path, "chain .plog")->required();
  replay->add_option("--key-a", key_a, "party A key file")->required();
  replay->add_option("--key-b", key_b, "party B key file")->required();
  replay->add_option("--deposit-a", deposit_a, "party A deposit")->required();
  replay->add_option("--deposit-b", deposit_b, "party B deposit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*keygen) return cmd_keygen(out_path, seed);
    if (*invoice)
      return cmd_invoice(out_path, supplier, supplier_key, price, inv_type);
    if (*sign)
      return cmd_sign(chain_path, invoice_path, buyer_key, seller_key,
                      channel, seed);
    if (*verify) return cmd_verify_chain(chain_path);
    if (*run) {
      const auto format = parsec::parse_report_format(format_name);
      if (!format) {
        std::cerr << "error: --format must be text or kv\n";
        return 2;
      }
      return cmd_run(scenario_path, seed, report_path, *format, parallel);
    }
    if (*replay)
      return cmd_replay(chain_path, key_a, key_b, deposit_a, deposit_b);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
