#pragma once

#include <agmlab/errors.hpp>
#include <agmlab/linalg.hpp>
#include <agmlab/problems.hpp>
#include <agmlab/dynamics.hpp>
#include <agmlab/conservation.hpp>
#include <agmlab/discrete.hpp>
#include <agmlab/lab.hpp>
