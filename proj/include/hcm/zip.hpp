#pragma once

#include <map>
#include <string>

namespace hcm {

// Uncompressed (stored) zip archive of name -> contents, entries in map
// order with a fixed timestamp so equal inputs give equal bytes.
std::string make_stored_zip(const std::map<std::string, std::string>& files);

// Reads back an archive written by make_stored_zip (stored entries only);
// verifies each CRC. Throws hcm::Error on anything else.
std::map<std::string, std::string> read_stored_zip(const std::string& archive);

}  // namespace hcm
