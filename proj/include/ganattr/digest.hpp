#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ganattr {

// SHA-256 wrapper (OpenSSL libcrypto) used for bundle content digests,
// manifest digests, and lineage tracking.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }

    std::vector<std::uint8_t> finish();  // 32 bytes; object unusable afterwards

private:
    void* ctx_;
};

std::vector<std::uint8_t> sha256_bytes(const void* data, std::size_t len);
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);
std::string to_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace ganattr
