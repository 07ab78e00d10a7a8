#include "csisim/io.hpp"

#include <fstream>
#include <stdexcept>

namespace csisim {
namespace io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary dumps are little-endian; byte-swapping is not implemented");

void write_floats(std::ofstream& out, const float* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream f(path, mode);
    if (!f) throw std::runtime_error("io: cannot open for writing: " + path.string());
    return f;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream f(path, mode);
    if (!f) throw std::runtime_error("io: cannot open for reading: " + path.string());
    return f;
}

void write_doubles_bin(const std::filesystem::path& path, const std::vector<double>& v) {
    auto f = open_out(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles_bin(const std::filesystem::path& path, std::size_t n) {
    auto f = open_in(path, std::ios::binary);
    std::vector<double> v(n);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("io: truncated binary file: " + path.string());
    return v;
}

} // namespace

void write_csi_stream(const std::filesystem::path& dir, const std::string& name,
                      const CsiStream& stream) {
    std::filesystem::create_directories(dir);
    const std::string bin_name = name + ".bin";

    nlohmann::json meta;
    meta["receiver_id"] = stream.receiver_id;
    meta["frames_count"] = stream.frames.size();
    meta["antennas_count"] = stream.frames.empty() ? 0 : stream.frames.front().rows();
    meta["subcarriers_count"] = stream.frames.empty() ? 0 : stream.frames.front().cols();
    meta["timestamps_s"] = stream.timestamps;
    meta["phase_error_rad"] = stream.phase_error;
    meta["noise_var_pow"] = stream.noise_var;
    meta["layout"] = "complex64 little-endian, frame-major, antenna rows, subcarrier cols";
    meta["payload"] = bin_name;
    write_json(dir / (name + ".json"), meta);

    auto bin = open_out(dir / bin_name, std::ios::binary);
    for (const auto& frame : stream.frames) {
        for (Eigen::Index m = 0; m < frame.rows(); ++m) {
            for (Eigen::Index n = 0; n < frame.cols(); ++n) {
                const float re = static_cast<float>(frame(m, n).real());
                const float im = static_cast<float>(frame(m, n).imag());
                write_floats(bin, &re, 1);
                write_floats(bin, &im, 1);
            }
        }
    }
}

CsiStream read_csi_stream(const std::filesystem::path& dir, const std::string& name) {
    const nlohmann::json meta = read_json(dir / (name + ".json"));
    CsiStream stream;
    stream.receiver_id = meta.at("receiver_id").get<int>();
    stream.timestamps = meta.at("timestamps_s").get<std::vector<double>>();
    stream.phase_error = meta.at("phase_error_rad").get<std::vector<double>>();
    stream.noise_var = meta.at("noise_var_pow").get<double>();
    const auto frames = meta.at("frames_count").get<std::size_t>();
    const auto rows = meta.at("antennas_count").get<Eigen::Index>();
    const auto cols = meta.at("subcarriers_count").get<Eigen::Index>();

    auto bin = open_in(dir / meta.at("payload").get<std::string>(), std::ios::binary);
    stream.frames.resize(frames);
    for (auto& frame : stream.frames) {
        frame.resize(rows, cols);
        for (Eigen::Index m = 0; m < rows; ++m) {
            for (Eigen::Index n = 0; n < cols; ++n) {
                float re = 0.0f, im = 0.0f;
                bin.read(reinterpret_cast<char*>(&re), sizeof(float));
                bin.read(reinterpret_cast<char*>(&im), sizeof(float));
                frame(m, n) = cdouble(re, im);
            }
        }
    }
    if (!bin) throw std::runtime_error("io: truncated CSI payload for " + name);
    return stream;
}

void write_spectrum_csv(const std::filesystem::path& path, const spectral::SpectrumGrid& grid) {
    auto f = open_out(path);
    f.precision(12);
    f << "theta_deg_vs_tau_ns";
    for (double tau : grid.tau) f << ',' << tau * 1e9;
    f << '\n';
    for (std::size_t i = 0; i < grid.theta.size(); ++i) {
        f << rad_to_deg(grid.theta[i]);
        for (std::size_t j = 0; j < grid.tau.size(); ++j)
            f << ',' << grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        f << '\n';
    }
}

void write_feature_csv(const std::filesystem::path& path, const perception::FeatureMatrix& fm) {
    auto f = open_out(path);
    f.precision(12);
    auto dump = [&f](const Eigen::MatrixXd& m, const char* label) {
        f << "# " << label << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) f << (c ? "," : "") << m(r, c);
            f << '\n';
        }
    };
    dump(fm.phase, "phase_rad");
    dump(fm.magnitude, "amplitude");
}

void write_feature_bin(const std::filesystem::path& dir, const std::string& name,
                       const perception::FeatureMatrix& fm) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["antennas_count"] = fm.phase.rows();
    meta["subcarriers_count"] = fm.phase.cols();
    meta["layout"] = "float32 little-endian, phase block then amplitude block, antenna rows";
    meta["payload"] = name + ".bin";
    write_json(dir / (name + ".json"), meta);

    auto bin = open_out(dir / (name + ".bin"), std::ios::binary);
    auto dump = [&bin](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const float v = static_cast<float>(m(r, c));
                write_floats(bin, &v, 1);
            }
    };
    dump(fm.phase);
    dump(fm.magnitude);
}

void write_model(const std::filesystem::path& dir, const std::string& name,
                 const skeleton::PredictorModel& model) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["kind"] = model.kind;
    meta["rows_count"] = model.weights.rows();
    meta["cols_count"] = model.weights.cols();
    meta["ridge_lambda"] = model.ridge_lambda;
    meta["training_mse_sq"] = model.training_mse;
    meta["target_variance_sq"] = model.target_variance;
    meta["samples_count"] = model.samples;
    meta["layout"] = "float64 little-endian, row-major";
    meta["payload"] = name + ".bin";
    write_json(dir / (name + ".json"), meta);

    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(model.weights.size()));
    for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < model.weights.cols(); ++c) flat.push_back(model.weights(r, c));
    write_doubles_bin(dir / (name + ".bin"), flat);
}

skeleton::PredictorModel read_model(const std::filesystem::path& dir, const std::string& name) {
    const nlohmann::json meta = read_json(dir / (name + ".json"));
    skeleton::PredictorModel model;
    model.kind = meta.at("kind").get<std::string>();
    model.ridge_lambda = meta.at("ridge_lambda").get<double>();
    model.training_mse = meta.at("training_mse_sq").get<double>();
    model.target_variance = meta.at("target_variance_sq").get<double>();
    model.samples = meta.at("samples_count").get<int>();
    const auto rows = meta.at("rows_count").get<Eigen::Index>();
    const auto cols = meta.at("cols_count").get<Eigen::Index>();
    const auto flat = read_doubles_bin(dir / meta.at("payload").get<std::string>(),
                                       static_cast<std::size_t>(rows * cols));
    model.weights.resize(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) model.weights(r, c) = flat[k++];
    return model;
}

void write_checkpoint(const std::filesystem::path& dir, const std::string& name,
                      const PolicyCheckpoint& ckpt) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["schedule_beta"] = ckpt.schedule.beta;
    meta["box"] = {{"v_r_max", ckpt.box.v_r_max}, {"i_b_max", ckpt.box.i_b_max}};
    meta["denoiser"] = {{"steps_count", ckpt.denoiser.steps},
                        {"cond_dim_count", ckpt.denoiser.cond_dim},
                        {"hidden_count", ckpt.denoiser.net.weights()[0].rows()},
                        {"params_count", ckpt.denoiser.net.parameter_count()}};
    meta["critic"] = {{"input_dim_count", ckpt.critic.net.input_dim()},
                      {"hidden_count", ckpt.critic.net.weights()[0].rows()},
                      {"params_count", ckpt.critic.net.parameter_count()}};
    meta["reward_scale_util"] = ckpt.reward_scale;
    meta["env_encoding"] = "v1";
    meta["layout"] = "float64 little-endian, denoiser params then critic params";
    meta["payload"] = name + ".bin";
    write_json(dir / (name + ".json"), meta);

    std::vector<double> flat = ckpt.denoiser.net.parameters();
    const std::vector<double> critic = ckpt.critic.net.parameters();
    flat.insert(flat.end(), critic.begin(), critic.end());
    write_doubles_bin(dir / (name + ".bin"), flat);
}

PolicyCheckpoint read_checkpoint(const std::filesystem::path& dir, const std::string& name) {
    const nlohmann::json meta = read_json(dir / (name + ".json"));
    PolicyCheckpoint ckpt;
    ckpt.schedule.beta = meta.at("schedule_beta").get<std::vector<double>>();
    ckpt.schedule.validate();
    ckpt.box.v_r_max = meta.at("box").at("v_r_max").get<double>();
    ckpt.box.i_b_max = meta.at("box").at("i_b_max").get<double>();
    ckpt.reward_scale = meta.at("reward_scale_util").get<double>();

    const int steps = meta.at("denoiser").at("steps_count").get<int>();
    const int cond = meta.at("denoiser").at("cond_dim_count").get<int>();
    const int d_hidden = meta.at("denoiser").at("hidden_count").get<int>();
    const int c_in = meta.at("critic").at("input_dim_count").get<int>();
    const int c_hidden = meta.at("critic").at("hidden_count").get<int>();

    Rng dummy(0);
    ckpt.denoiser = policy::DenoiserNet(steps, cond, d_hidden, dummy);
    ckpt.critic.net = Mlp(c_in, c_hidden, 1, dummy);

    const auto n_d = static_cast<std::size_t>(ckpt.denoiser.net.parameter_count());
    const auto n_c = static_cast<std::size_t>(ckpt.critic.net.parameter_count());
    const auto flat = read_doubles_bin(dir / meta.at("payload").get<std::string>(), n_d + n_c);
    ckpt.denoiser.net.set_parameters({flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_d)});
    ckpt.critic.net.set_parameters({flat.begin() + static_cast<std::ptrdiff_t>(n_d), flat.end()});
    return ckpt;
}

void write_reward_curve(const std::filesystem::path& path, const std::vector<double>& curve) {
    auto f = open_out(path);
    f.precision(12);
    f << "epoch,reward_util\n";
    for (std::size_t i = 0; i < curve.size(); ++i) f << i << ',' << curve[i] << '\n';
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto f = open_out(path);
    f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    auto f = open_in(path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("io: JSON parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

} // namespace io
} // namespace csisim
