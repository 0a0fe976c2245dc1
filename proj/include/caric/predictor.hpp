#pragma once

#include "caric/param_domain.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace caric {

/// Anything that maps the four flattened maps to a lambda map on the same
/// chart. Implementations may live in-process, behind HTTP, or behind a file
/// exchange; the contract checks happen in run_external_predictor.
class LambdaPredictor {
public:
    virtual ~LambdaPredictor() = default;
    virtual Raster predict(const FlattenedMaps& maps) = 0;
};

class FunctionPredictor : public LambdaPredictor {
public:
    explicit FunctionPredictor(std::function<Raster(const FlattenedMaps&)> fn) : fn_(std::move(fn)) {}
    Raster predict(const FlattenedMaps& maps) override { return fn_(maps); }

private:
    std::function<Raster(const FlattenedMaps&)> fn_;
};

/// Emits a constant map, masked like the input.
class ConstantPredictor : public LambdaPredictor {
public:
    explicit ConstantPredictor(double value = 1.0) : value_(value) {}
    Raster predict(const FlattenedMaps& maps) override;

private:
    double value_;
};

/// POSTs the map bundle (application/octet-stream) and reads one raster
/// container back.
class HttpPredictor : public LambdaPredictor {
public:
    HttpPredictor(std::string host, int port, std::string path = "/predict", int timeout_s = 60);
    Raster predict(const FlattenedMaps& maps) override;

private:
    std::string host_;
    int port_;
    std::string path_;
    int timeout_s_;
};

/// Writes L_d.crst, L_m.crst, S_d.crst and S_m.crst into `dir`, runs
/// `command` through the shell with the directory as its only argument and
/// reads `dir`/lambda.crst.
class FileExchangePredictor : public LambdaPredictor {
public:
    FileExchangePredictor(std::filesystem::path dir, std::string command);
    Raster predict(const FlattenedMaps& maps) override;

private:
    std::filesystem::path dir_;
    std::string command_;
};

/// Checks the returned map (single channel, chart resolution, finite on valid
/// pixels) and samples it back to vertices with clamping.
LambdaField run_external_predictor(const FlattenedMaps& maps, LambdaPredictor& predictor, const ParamChart& chart,
                                   const LambdaBounds& bounds = {});

} // namespace caric
