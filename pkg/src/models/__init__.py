"""Model problems: ODE oscillator and Cauchy-Riemann operator"""
