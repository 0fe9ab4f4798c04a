#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexflow/dex_checker.hpp"
#include "dexflow/jvm_checker.hpp"
#include "dexflow/translator.hpp"

namespace dexflow {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int col, const std::string& msg)
        : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
          line(line), col(col)
    {
    }
    int line;
    int col;
};

// Assembly units. Both parsers run the structural validation of their
// machine and report its failures as a ParseError at line 0.
JvmProgram parse_jvm(const std::string& text);
DexProgram parse_dex(const std::string& text);
std::string serialize(const JvmProgram& prog);
std::string serialize(const DexProgram& prog);

// One instruction as written in a unit, jump targets by label when known.
std::string format_insn(const JvmInsn& ins, const JvmMethod& m);
std::string format_insn(const DexInsn& ins, const DexMethod& m);

template <class Cert>
struct NamedCertificate {
    std::string method;
    Level receiver = 0;
    Cert cert;
};

std::string serialize_certificate(const Lattice& lat, const std::string& method, Level receiver,
                                  const JvmCertificate& cert);
std::string serialize_certificate(const Lattice& lat, const std::string& method, Level receiver,
                                  const DexCertificate& cert);
std::vector<NamedCertificate<JvmCertificate>> parse_jvm_certificates(const Lattice& lat,
                                                                     const std::string& text);
std::vector<NamedCertificate<DexCertificate>> parse_dex_certificates(const Lattice& lat,
                                                                     const std::string& text);

std::string serialize_amaps(const std::map<std::string, AddressMap>& amaps);
std::map<std::string, AddressMap> parse_amaps(const std::string& text);

// Reads a whole file; throws std::runtime_error when it cannot be opened.
std::string read_file(const std::string& path);

}  // namespace dexflow
