#include "cfdebias/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cfdebias/error.hpp"

namespace cfdebias {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'C', 'F', 'D', 'B', 'C', 'K', 'P', 'T'};
constexpr std::array<const char*, 5> kNetworkNames = {"encoder", "decoder", "classifier", "adversary", "generator"};

class Writer {
public:
    template <typename T>
    void put(T v)
    {
        const auto* p = reinterpret_cast<const char*>(&v);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void put_bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
    void put_string(const std::string& s)
    {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    void put_matrix(const Eigen::MatrixXd& m)
    {
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j)
                put(m(i, j));
    }
    std::vector<char> take() { return std::move(out_); }

private:
    std::vector<char> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<char>& in) : in_(in) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + at_, sizeof(T));
        at_ += sizeof(T);
        return v;
    }
    std::string get_bytes(std::uint64_t n)
    {
        need(n);
        std::string s(in_.data() + at_, static_cast<std::size_t>(n));
        at_ += static_cast<std::size_t>(n);
        return s;
    }
    Eigen::MatrixXd get_matrix(std::uint64_t rows, std::uint64_t cols)
    {
        need(rows * cols * sizeof(double));
        Eigen::MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j)
                m(i, j) = get<double>();
        return m;
    }
    bool done() const { return at_ == in_.size(); }

private:
    void need(std::uint64_t n) const
    {
        if (n > in_.size() - at_)
            fail(ErrorCode::CheckpointMismatch, "checkpoint truncated at byte " + std::to_string(at_));
    }

    const std::vector<char>& in_;
    std::size_t at_ = 0;
};

std::array<const MlpParams*, 5> networks(const ModelParams& p)
{
    return {&p.encoder, &p.decoder, &p.classifier, &p.adversary, &p.generator};
}

} // namespace

std::vector<char> checkpoint_bytes(const Checkpoint& ckpt)
{
    ckpt.params.validate();
    Writer w;
    w.put_bytes(kMagic.data(), kMagic.size());
    w.put(kCheckpointVersion);
    w.put(ckpt.seed);
    w.put(static_cast<std::uint64_t>(ckpt.config_text.size()));
    w.put_bytes(ckpt.config_text.data(), ckpt.config_text.size());
    w.put(static_cast<std::uint64_t>(ckpt.params.gender_dim));
    w.put(static_cast<std::uint32_t>(kNetworkNames.size()));
    const auto nets = networks(ckpt.params);
    for (std::size_t i = 0; i < nets.size(); ++i) {
        const MlpParams& n = *nets[i];
        w.put_string(kNetworkNames[i]);
        w.put(static_cast<std::uint32_t>(n.out_activation));
        w.put(static_cast<std::uint64_t>(n.inputs()));
        w.put(static_cast<std::uint64_t>(n.hidden()));
        w.put(static_cast<std::uint64_t>(n.outputs()));
        w.put_matrix(n.w1);
        w.put_matrix(n.b1);
        w.put_matrix(n.w2);
        w.put_matrix(n.b2);
    }
    return w.take();
}

Checkpoint checkpoint_from_bytes(const std::vector<char>& bytes)
{
    Reader r(bytes);
    if (r.get_bytes(kMagic.size()) != std::string(kMagic.data(), kMagic.size()))
        fail(ErrorCode::CheckpointMismatch, "not a checkpoint (bad magic)");
    if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
        fail(ErrorCode::CheckpointMismatch, "unsupported checkpoint version " + std::to_string(v));
    Checkpoint ckpt;
    ckpt.seed = r.get<std::uint64_t>();
    ckpt.config_text = r.get_bytes(r.get<std::uint64_t>());
    ckpt.params.gender_dim = static_cast<Index>(r.get<std::uint64_t>());
    if (r.get<std::uint32_t>() != kNetworkNames.size())
        fail(ErrorCode::CheckpointMismatch, "unexpected network count");

    std::array<MlpParams*, 5> nets = {&ckpt.params.encoder, &ckpt.params.decoder, &ckpt.params.classifier,
                                      &ckpt.params.adversary, &ckpt.params.generator};
    for (std::size_t i = 0; i < nets.size(); ++i) {
        const std::string name = r.get_bytes(r.get<std::uint32_t>());
        if (name != kNetworkNames[i])
            fail(ErrorCode::CheckpointMismatch, "expected network '" + std::string(kNetworkNames[i]) + "', found '" +
                                                    name + "'");
        const auto act = r.get<std::uint32_t>();
        if (act > static_cast<std::uint32_t>(Activation::Linear))
            fail(ErrorCode::CheckpointMismatch, "unknown activation code " + std::to_string(act));
        const auto n_in = r.get<std::uint64_t>();
        const auto hidden = r.get<std::uint64_t>();
        const auto n_out = r.get<std::uint64_t>();
        MlpParams& n = *nets[i];
        n.out_activation = static_cast<Activation>(act);
        n.w1 = r.get_matrix(hidden, n_in);
        n.b1 = r.get_matrix(hidden, 1);
        n.w2 = r.get_matrix(n_out, hidden);
        n.b2 = r.get_matrix(n_out, 1);
    }
    if (!r.done())
        fail(ErrorCode::CheckpointMismatch, "trailing bytes after the last network");
    try {
        ckpt.params.validate();
    } catch (const Error& e) {
        fail(ErrorCode::CheckpointMismatch, e.what());
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    const auto bytes = checkpoint_bytes(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, "cannot open checkpoint " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

} // namespace cfdebias
