#ifndef FSCBF_HUMANS_HPP
#define FSCBF_HUMANS_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fscbf/types.hpp"

namespace fscbf {

struct SfmParams {
    double tau = 0.5;      // relaxation time [s]
    double strength = 2.0; // repulsion magnitude A_h [m/s^2]
    double range = 0.3;    // repulsion length scale B_h [m]
    double radius = 0.3;   // body radius [m]
};

struct HumanAgent {
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
    Eigen::Vector2d goal = Eigen::Vector2d::Zero();
    double desired_speed = 1.0;
    SfmParams sfm;

    bool valid() const { return desired_speed > 0.0 && sfm.tau > 0.0 && sfm.range > 0.0; }
};

/// Robot as seen by the pedestrians (a repulsive agent).
struct SocialObstacle {
    Eigen::Vector2d position;
    double radius = 0.3;
};

/// Social-force acceleration on human i.
inline Eigen::Vector2d social_force(const std::vector<HumanAgent>& humans, std::size_t i,
                                    const std::optional<SocialObstacle>& robot)
{
    const HumanAgent& me = humans[i];
    Eigen::Vector2d desired = Eigen::Vector2d::Zero();
    const Eigen::Vector2d to_goal = me.goal - me.position;
    const double dist = to_goal.norm();
    if (dist > 1e-9) desired = me.desired_speed * to_goal / dist;
    Eigen::Vector2d force = (desired - me.velocity) / me.sfm.tau;

    auto repel = [&](const Eigen::Vector2d& other, double other_radius) {
        const Eigen::Vector2d sep = me.position - other;
        const double d = sep.norm();
        if (d <= 1e-12) return;
        force += me.sfm.strength * std::exp((me.sfm.radius + other_radius - d) / me.sfm.range) * sep / d;
    };
    for (std::size_t j = 0; j < humans.size(); ++j) {
        if (j != i) repel(humans[j].position, humans[j].sfm.radius);
    }
    if (robot) repel(robot->position, robot->radius);
    return force;
}

/// Advances every human by one explicit Euler step of the social force model.
inline std::vector<HumanAgent> social_force_step(const std::vector<HumanAgent>& humans,
                                                 const std::optional<SocialObstacle>& robot, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("social_force_step: dt must be positive");
    std::vector<HumanAgent> next = humans;
    for (std::size_t i = 0; i < humans.size(); ++i) {
        const Eigen::Vector2d acc = social_force(humans, i, robot);
        next[i].position = humans[i].position + dt * humans[i].velocity;
        next[i].velocity = humans[i].velocity + dt * acc;
    }
    return next;
}

} // namespace fscbf

#endif // FSCBF_HUMANS_HPP
