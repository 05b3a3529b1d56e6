#include <cstring>
#include <fstream>

#include "errors.hpp"
#include "gp.hpp"
#include "ioutil.hpp"
#include "json.hpp"

namespace ioncalib {

namespace {

constexpr char kMagic[8] = {'I', 'O', 'N', 'G', 'P', 'B', '1', '\0'};

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
}

Eigen::MatrixXd read_matrix(std::ifstream& in, const std::string& path) {
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    if (!in || rows > 1u << 24 || cols > 1u << 24) throw ParseError("gp snapshot blob corrupt: " + path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw ParseError("gp snapshot blob truncated: " + path);
    return m;
}

std::string blob_path_for(const std::string& json_path) {
    const auto dot = json_path.rfind(".json");
    return (dot == std::string::npos ? json_path : json_path.substr(0, dot)) + ".bin";
}

}  // namespace

void save_gp_snapshot(const GpSnapshot& snapshot, const std::string& json_path) {
    const std::string bin_path = blob_path_for(json_path);

    std::ofstream blob(bin_path, std::ios::binary);
    if (!blob) throw IoError("cannot write gp snapshot blob: " + bin_path);
    blob.write(kMagic, sizeof kMagic);
    write_matrix(blob, snapshot.inducing);
    write_matrix(blob, snapshot.lpp);
    write_matrix(blob, snapshot.la);
    write_matrix(blob, snapshot.whitened_weights);
    blob.close();

    nlohmann::json doc;
    doc["kernel"] = kernel_family_name(snapshot.kernel.family);
    doc["alpha"] = snapshot.kernel.alpha;
    doc["rho"] = snapshot.kernel.rho;
    doc["sigma"] = snapshot.sigma;
    doc["standardizer_mean"] = std::vector<double>(snapshot.standardizer.mean.data(),
                                                   snapshot.standardizer.mean.data() + snapshot.standardizer.mean.size());
    doc["standardizer_scale"] = std::vector<double>(snapshot.standardizer.scale.data(),
                                                    snapshot.standardizer.scale.data() + snapshot.standardizer.scale.size());
    doc["inducing_count"] = snapshot.inducing.rows();
    doc["covariate_dims"] = snapshot.inducing.cols();
    doc["marginal_loglik"] = snapshot.marginal_loglik;
    doc["blob"] = bin_path;
    doc["blob_layout"] = "magic,inducing,lpp,la,whitened_weights; row-major dims header, column-major doubles";
    save_json(doc, json_path);
}

GpSnapshot load_gp_snapshot(const std::string& json_path) {
    const nlohmann::json doc = load_json(json_path, "gp snapshot");
    GpSnapshot s;
    s.kernel.family = kernel_family_from_name(doc.at("kernel").get<std::string>());
    s.kernel.alpha = doc.at("alpha").get<double>();
    s.kernel.rho = doc.at("rho").get<std::vector<double>>();
    s.sigma = doc.at("sigma").get<double>();
    const auto mean = doc.at("standardizer_mean").get<std::vector<double>>();
    const auto scale = doc.at("standardizer_scale").get<std::vector<double>>();
    s.standardizer.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    s.standardizer.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    s.marginal_loglik = doc.at("marginal_loglik").get<double>();

    const std::string bin_path = doc.at("blob").get<std::string>();
    std::ifstream blob(bin_path, std::ios::binary);
    if (!blob) throw IoError("gp snapshot blob not found: " + bin_path);
    char magic[8];
    blob.read(magic, sizeof magic);
    if (!blob || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError("gp snapshot blob has wrong magic: " + bin_path);
    s.inducing = read_matrix(blob, bin_path);
    s.lpp = read_matrix(blob, bin_path);
    s.la = read_matrix(blob, bin_path);
    s.whitened_weights = read_matrix(blob, bin_path);
    return s;
}

FitcGpFit FitcGpFit::from_snapshot(const GpSnapshot& snapshot) {
    FitcGpFit fit;
    fit.kspec_ = snapshot.kernel;
    fit.inducing_ = snapshot.inducing;
    fit.lpp_ = snapshot.lpp;
    fit.la_ = snapshot.la;
    fit.whitened_weights_ = snapshot.whitened_weights;
    fit.sigma_ = snapshot.sigma;
    fit.marginal_loglik_ = snapshot.marginal_loglik;
    return fit;
}

GpSnapshot FitcGpFit::snapshot(const Standardizer& standardizer) const {
    GpSnapshot s;
    s.kernel = kspec_;
    s.sigma = sigma_;
    s.standardizer = standardizer;
    s.inducing = inducing_;
    s.lpp = lpp_;
    s.la = la_;
    s.whitened_weights = whitened_weights_;
    s.marginal_loglik = marginal_loglik_;
    return s;
}

}  // namespace ioncalib
