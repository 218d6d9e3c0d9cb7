#pragma once

#include <stdexcept>
#include <string>

namespace asid {

// Error taxonomy used across the library. The CLI maps these onto exit codes:
// ConfigError -> 2 (usage), DataError/StoreError -> 3 (data), everything
// else -> 4 (numeric/contract).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or axis mismatch between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// A precondition of an operation was violated (non-scalar loss, repeated
// backward, geometry below minimum, ...).
struct ContractError : Error {
    using Error::Error;
};

// Invalid model or training configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Attention-sharing registry misuse: fetch before publish, or shared
// matrices whose geometry does not match the consumer.
struct ShareError : Error {
    using Error::Error;
};

// Weight store file is corrupt or inconsistent with the requested config.
struct StoreError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// Missing or malformed input files (images, manifests).
struct DataError : Error {
    using Error::Error;
};

} // namespace asid
