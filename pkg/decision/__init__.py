# Decision package
# Contains probability maps and the MAP, ML and threshold decision rules
