#pragma once

#include <stdexcept>
#include <string>

namespace annsnn {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not compose.
class DimensionError : public Error
{
public:
    using Error::Error;
};

/// Invalid parameters, options or network layouts. Maps to CLI exit code 1.
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Malformed input file; the message carries the byte offset or line number.
class ParseError : public Error
{
public:
    using Error::Error;
};

class TrainingDivergence : public Error
{
public:
    TrainingDivergence(int epoch, int batch, const std::string& what)
        : Error(what), epoch(epoch), batch(batch)
    {
    }

    int epoch;
    int batch;
};

class SimulationError : public Error
{
public:
    SimulationError(std::size_t layer, int step, const std::string& what)
        : Error(what), layer(layer), step(step)
    {
    }

    std::size_t layer;
    int step;
};

class ConversionError : public Error
{
public:
    using Error::Error;
};

class FilesystemError : public Error
{
public:
    using Error::Error;
};

}  // namespace annsnn
