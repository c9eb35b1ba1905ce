// SPDX-License-Identifier: Apache-2.0
#include <toa/compute.hpp>
#include <toa/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

namespace toa
{

double call_flops(std::uint64_t param_count, std::uint64_t prompt_tokens, std::uint64_t completion_tokens,
                  double multiplier)
{
    return multiplier * static_cast<double>(param_count) * static_cast<double>(prompt_tokens + completion_tokens);
}

AgentUsage& AgentUsage::operator+=(const AgentUsage& other) noexcept
{
    calls += other.calls;
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    flops += other.flops;
    return *this;
}

double BudgetLedger::record(std::string_view agent_id, std::uint64_t param_count, std::uint64_t prompt_tokens,
                            std::uint64_t completion_tokens)
{
    const auto flops = call_flops(param_count, prompt_tokens, completion_tokens, _multiplier);
    auto it = _per_agent.find(agent_id);
    if (it == _per_agent.end())
        it = _per_agent.emplace(std::string { agent_id }, AgentUsage {}).first;
    it->second += AgentUsage { 1, prompt_tokens, completion_tokens, flops };
    _total_flops += flops;
    return flops;
}

void BudgetLedger::merge(const BudgetLedger& other)
{
    for (const auto& [id, usage]: other._per_agent)
        _per_agent[id] += usage;
    _total_flops += other._total_flops;
}

void BudgetLedger::restore(std::string_view agent_id, const AgentUsage& usage)
{
    auto it = _per_agent.find(agent_id);
    if (it == _per_agent.end())
        it = _per_agent.emplace(std::string { agent_id }, AgentUsage {}).first;
    it->second += usage;
    _total_flops += usage.flops;
}

double BudgetLedger::generation_flops() const noexcept
{
    return _total_flops - reward_flops();
}

double BudgetLedger::reward_flops() const noexcept
{
    auto it = _per_agent.find(RewardKey);
    return it == _per_agent.end() ? 0.0 : it->second.flops;
}

double ScalingFit::predict(double compute) const noexcept
{
    const auto x = std::log10(compute);
    return a * x * x + b * x + c;
}

ScalingFit fit_scaling_curve(std::span<const ScalingPoint> points)
{
    auto distinct = std::set<double> {};
    for (const auto& p: points)
    {
        if (!(p.compute > 0.0))
            throw DegenerateFit("compute values must be positive");
        distinct.insert(p.compute);
    }
    if (distinct.size() < 3)
        throw DegenerateFit("need at least 3 distinct compute values, got " + std::to_string(distinct.size()));

    // Fit on a centred and scaled abscissa, then map the coefficients back.
    const auto n = static_cast<Eigen::Index>(points.size());
    auto x = Eigen::VectorXd(n);
    auto y = Eigen::VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        x(i) = std::log10(points[static_cast<std::size_t>(i)].compute);
        y(i) = points[static_cast<std::size_t>(i)].reward;
    }
    const auto mean = x.mean();
    const auto scale = std::max((x.array() - mean).abs().maxCoeff(), 1e-300);
    auto t = ((x.array() - mean) / scale).matrix().eval();

    auto design = Eigen::MatrixXd(n, 3);
    design.col(0) = t.array().square().matrix();
    design.col(1) = t;
    design.col(2).setOnes();

    const auto qr = design.colPivHouseholderQr();
    const Eigen::Vector3d coef = qr.solve(y);

    const auto a2 = coef(0), b1 = coef(1), c0 = coef(2);
    auto fit = ScalingFit {};
    fit.a = a2 / (scale * scale);
    fit.b = b1 / scale - 2.0 * a2 * mean / (scale * scale);
    fit.c = a2 * mean * mean / (scale * scale) - b1 * mean / scale + c0;
    fit.points_used = points.size();

    const Eigen::VectorXd residual = y - design * coef;
    fit.rmse = std::sqrt(residual.squaredNorm() / static_cast<double>(n));

    if (n > 3)
    {
        // Covariance in the original parameterisation: J (T^T T)^-1 J^T s^2,
        // with J the linear map from scaled to raw coefficients.
        const auto sigma2 = residual.squaredNorm() / static_cast<double>(n - 3);
        const Eigen::Matrix3d gram_inv = (design.transpose() * design).inverse();
        auto jac = Eigen::Matrix3d {};
        const auto s2 = scale * scale;
        jac << 1.0 / s2, 0.0, 0.0, -2.0 * mean / s2, 1.0 / scale, 0.0, mean * mean / s2, -mean / scale, 1.0;
        const Eigen::Matrix3d cov = jac * gram_inv * jac.transpose() * sigma2;
        for (int i = 0; i < 3; ++i)
            fit.std_errors[static_cast<std::size_t>(i)] = std::sqrt(std::max(cov(i, i), 0.0));
    }
    return fit;
}

} // namespace toa
