"""
Módulo Core - Modelos, otimização, controladores e simulação
"""
