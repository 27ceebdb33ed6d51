#pragma once

#include "hjpdhg/grid.hpp"
#include "hjpdhg/problem.hpp"
#include "hjpdhg/precond.hpp"
#include "hjpdhg/pdhg.hpp"
#include "hjpdhg/trajectory.hpp"
#include "hjpdhg/oracle.hpp"
#include "hjpdhg/config.hpp"
#include "hjpdhg/io.hpp"
