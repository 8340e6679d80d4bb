# Old version of join as a transition system.
vars lenA lenB i j cost;
locations l0 l1 l2 l3 lout;
init l0;
terminal lout;
theta0 lenA >= 1, lenA <= 100, lenB >= 1, lenB <= 100, cost >= 0, -cost >= 0;
trans l0 -> l1 update i := 0;
trans l1 -> lout guard i >= lenA;
trans l1 -> l2 guard i < lenA update j := 0;
trans l2 -> l1 guard j >= lenB update i := i + 1;
trans l2 -> l3 guard j < lenB;
trans l3 -> l2 update j := j + 1, cost := cost + 1;
trans lout -> lout;
