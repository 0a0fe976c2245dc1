#include "caric/predictor.hpp"

#include "caric/error.hpp"

#include <httplib.h>

#include <cstdlib>

namespace caric {

namespace {

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

} // namespace

Raster ConstantPredictor::predict(const FlattenedMaps& maps)
{
    const Raster& like = maps.laplacian_magnitude;
    Raster out(like.width, like.height, 1, static_cast<float>(value_));
    out.mask = like.mask;
    return out;
}

HttpPredictor::HttpPredictor(std::string host, int port, std::string path, int timeout_s)
    : host_(std::move(host)), port_(port), path_(std::move(path)), timeout_s_(timeout_s)
{
}

Raster HttpPredictor::predict(const FlattenedMaps& maps)
{
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    const auto res = client.Post(path_, encode_bundle(maps.as_bundle()), "application/octet-stream");
    if (!res)
        throw Error(ErrorCode::Io, "predictor at " + host_ + ":" + std::to_string(port_) + " is unreachable: " +
                                       httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorCode::ContractViolation, "predictor answered HTTP " + std::to_string(res->status));
    try {
        return decode_raster(res->body);
    } catch (const Error& e) {
        throw Error(ErrorCode::ContractViolation, std::string("predictor response: ") + e.what());
    }
}

FileExchangePredictor::FileExchangePredictor(std::filesystem::path dir, std::string command)
    : dir_(std::move(dir)), command_(std::move(command))
{
}

Raster FileExchangePredictor::predict(const FlattenedMaps& maps)
{
    std::filesystem::create_directories(dir_);
    const auto out = dir_ / "lambda.crst";
    std::filesystem::remove(out);
    for (const auto& [name, raster] : maps.as_bundle())
        write_raster(dir_ / (name + ".crst"), raster);
    const std::string cmd = command_ + " " + shell_quote(dir_.string());
    const int status = std::system(cmd.c_str());
    if (status != 0)
        throw Error(ErrorCode::Io, "predictor command failed with status " + std::to_string(status));
    if (!std::filesystem::exists(out))
        throw Error(ErrorCode::ContractViolation, "predictor command wrote no lambda.crst");
    return read_raster(out);
}

LambdaField run_external_predictor(const FlattenedMaps& maps, LambdaPredictor& predictor, const ParamChart& chart,
                                   const LambdaBounds& bounds)
{
    const Raster map = predictor.predict(maps);
    return lambda_from_map(chart, map, bounds);
}

} // namespace caric
