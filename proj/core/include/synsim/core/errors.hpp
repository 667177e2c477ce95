#pragma once

#include <stdexcept>
#include <string>

namespace synsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A job asks for more GPUs than a server (or the cluster) can ever provide.
class DemandError : public Error {
public:
    using Error::Error;
};

// Applying an allocation would overcommit a server.
class PlacementError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TraceError : public Error {
public:
    using Error::Error;
};

// Broken internal invariant. Should be unreachable.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace synsim
