# Noncommutative L_p inequality lab
